use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("unknown key '{key}'{}", line.map(|l| format!(" on line {l}")).unwrap_or_default())]
    UnknownKey { key: String, line: Option<usize> },

    #[error("{key}: {msg}")]
    Invalid { key: String, msg: String },

    #[error("override '{0}' is not of the form key=value")]
    BadOverride(String),
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),

    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },

    #[error(transparent)]
    Solver(#[from] carnot_mbo::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
