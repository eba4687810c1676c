//! Carnot group algebra for the built-in instances: Euclidean ℝ¹, ℝ² and the
//! first Heisenberg group ℍ¹, all in exponential coordinates of the first kind.
//!
//! The ℍ¹ law uses the symmetric convention
//! `(x,y,z)·(x',y',z') = (x+x', y+y', z+z'+(xy'−yx')/2)`, so that `p⁻¹ = −p`
//! and the left-invariant horizontal frame is
//! `X₁ = ∂x − (y/2)∂z`, `X₂ = ∂y + (x/2)∂z`.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

/// Which concrete group a descriptor stands for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GroupKind {
    /// ℝⁿ with n ∈ {1, 2}.
    Euclidean(usize),
    Heisenberg1,
}

impl GroupKind {
    /// Tag byte used by the binary field dump.
    pub fn tag(self) -> u8 {
        match self {
            GroupKind::Euclidean(1) => 0,
            GroupKind::Euclidean(_) => 1,
            GroupKind::Heisenberg1 => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(GroupKind::Euclidean(1)),
            1 => Ok(GroupKind::Euclidean(2)),
            2 => Ok(GroupKind::Heisenberg1),
            other => Err(Error::Format(format!("unknown group tag {other}"))),
        }
    }
}

impl fmt::Display for GroupKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupKind::Euclidean(n) => write!(f, "euclidean{n}"),
            GroupKind::Heisenberg1 => write!(f, "heisenberg1"),
        }
    }
}

/// A concrete stratified group: topological dimension, horizontal dimension
/// and the degree of each exponential coordinate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupDescriptor {
    pub kind: GroupKind,
    pub n: usize,
    pub m: usize,
    pub degrees: Vec<u32>,
}

impl GroupDescriptor {
    pub fn euclidean(n: usize) -> Result<Self> {
        if !(1..=2).contains(&n) {
            return Err(Error::InvalidArgument(format!(
                "only euclidean(1) and euclidean(2) are supported, got euclidean({n})"
            )));
        }
        Ok(Self {
            kind: GroupKind::Euclidean(n),
            n,
            m: n,
            degrees: vec![1; n],
        })
    }

    pub fn heisenberg1() -> Self {
        Self {
            kind: GroupKind::Heisenberg1,
            n: 3,
            m: 2,
            degrees: vec![1, 1, 2],
        }
    }

    pub fn from_kind(kind: GroupKind) -> Result<Self> {
        match kind {
            GroupKind::Euclidean(n) => Self::euclidean(n),
            GroupKind::Heisenberg1 => Ok(Self::heisenberg1()),
        }
    }

    /// Homogeneous dimension `Q = Σ deg(i)`.
    pub fn homogeneous_dim(&self) -> u32 {
        self.degrees.iter().sum()
    }

    /// Step of the stratification.
    pub fn step(&self) -> u32 {
        self.degrees.iter().copied().max().unwrap_or(1)
    }

    fn check(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: p.len(),
            });
        }
        Ok(())
    }

    pub fn multiply(&self, p: &[f64], q: &[f64]) -> Result<Vec<f64>> {
        self.check(p)?;
        self.check(q)?;
        let mut out: Vec<f64> = p.iter().zip(q).map(|(a, b)| a + b).collect();
        if self.kind == GroupKind::Heisenberg1 {
            out[2] += 0.5 * (p[0] * q[1] - p[1] * q[0]);
        }
        Ok(out)
    }

    pub fn inverse(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.check(p)?;
        Ok(p.iter().map(|v| -v).collect())
    }

    /// Homogeneous dilation `δ_λ`.
    pub fn dilate(&self, lambda: f64, p: &[f64]) -> Result<Vec<f64>> {
        self.check(p)?;
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "dilation factor must be positive, got {lambda}"
            )));
        }
        Ok(p.iter()
            .zip(&self.degrees)
            .map(|(v, &d)| lambda.powi(d as i32) * v)
            .collect())
    }

    /// Homogeneous pseudo-norm with `|p|₀^{2r!} = Σ |pᵢ|^{2r!/deg(i)}`.
    pub fn hnorm0(&self, p: &[f64]) -> Result<f64> {
        self.check(p)?;
        let r = self.step();
        let e = 2.0 * (1..=r).product::<u32>() as f64;
        let s: f64 = p
            .iter()
            .zip(&self.degrees)
            .map(|(v, &d)| v.abs().powf(e / d as f64))
            .sum();
        Ok(s.powf(1.0 / e))
    }

    /// The non-homogeneous norm `|v|_ε = Σ_{i≤m}|vᵢ| + Σ_{i>m} min(|vᵢ|/ε, |vᵢ|^{1/deg(i)})`.
    /// At `ε = 0` the first branch of the minimum is infinite.
    pub fn hnorm_eps(&self, eps: f64, p: &[f64]) -> Result<f64> {
        self.check(p)?;
        if eps < 0.0 || eps.is_nan() {
            return Err(Error::InvalidArgument(format!(
                "ε must be nonnegative, got {eps}"
            )));
        }
        Ok(hnorm_eps_unchecked(&self.degrees, self.m, eps, p))
    }

    /// `d_ε(p, q) = |q⁻¹·p|_ε`.
    pub fn dist_eps(&self, eps: f64, p: &[f64], q: &[f64]) -> Result<f64> {
        let qi = self.inverse(q)?;
        let v = self.multiply(&qi, p)?;
        self.hnorm_eps(eps, &v)
    }

    /// Coefficients of the horizontal frame `X₁,…,X_m` as polynomial vector fields.
    pub fn horizontal_fields(&self) -> Vec<VectorField> {
        match self.kind {
            GroupKind::Euclidean(n) => (0..n).map(|i| VectorField::coordinate(n, i)).collect(),
            GroupKind::Heisenberg1 => {
                // X₁ = ∂x − (y/2)∂z, X₂ = ∂y + (x/2)∂z
                let x1 = VectorField {
                    coeffs: vec![
                        Polynomial::constant(3, 1.0),
                        Polynomial::zero(3),
                        Polynomial::monomial(3, &[0, 1, 0], -0.5),
                    ],
                };
                let x2 = VectorField {
                    coeffs: vec![
                        Polynomial::zero(3),
                        Polynomial::constant(3, 1.0),
                        Polynomial::monomial(3, &[1, 0, 0], 0.5),
                    ],
                };
                vec![x1, x2]
            }
        }
    }

    /// The remaining basis fields `X_{m+1},…,X_n` (degree > 1).
    pub fn higher_fields(&self) -> Vec<VectorField> {
        match self.kind {
            GroupKind::Euclidean(_) => Vec::new(),
            GroupKind::Heisenberg1 => vec![VectorField::coordinate(3, 2)],
        }
    }

    /// Horizontal frame of 𝔾×ℝ: the fields of 𝔾 lifted, plus `∂_{n+1}`.
    pub fn product_horizontal_fields(&self) -> Vec<VectorField> {
        let dim = self.n + 1;
        let mut fields: Vec<VectorField> = self
            .horizontal_fields()
            .into_iter()
            .map(|f| f.lift(dim))
            .collect();
        fields.push(VectorField::coordinate(dim, self.n));
        fields
    }
}

pub(crate) fn hnorm_eps_unchecked(degrees: &[u32], m: usize, eps: f64, p: &[f64]) -> f64 {
    let mut s = 0.0;
    for (i, (&v, &d)) in p.iter().zip(degrees).enumerate() {
        let a = v.abs();
        if i < m {
            s += a;
        } else {
            let hom = a.powf(1.0 / d as f64);
            s += if eps > 0.0 { (a / eps).min(hom) } else { hom };
        }
    }
    s
}

/// A real polynomial in `dim` variables, stored as exponent vector → coefficient.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    dim: usize,
    terms: BTreeMap<Vec<u32>, f64>,
}

impl Polynomial {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Self::monomial(dim, &vec![0; dim], c)
    }

    pub fn monomial(dim: usize, exps: &[u32], c: f64) -> Self {
        assert_eq!(exps.len(), dim, "exponent vector length");
        let mut p = Self::zero(dim);
        if c != 0.0 {
            p.terms.insert(exps.to_vec(), c);
        }
        p
    }

    /// The coordinate function `x_i`.
    pub fn coordinate(dim: usize, i: usize) -> Self {
        let mut e = vec![0; dim];
        e[i] = 1;
        Self::monomial(dim, &e, 1.0)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// `Some(c)` when the polynomial is the constant `c`.
    pub fn as_constant(&self) -> Option<f64> {
        match self.terms.len() {
            0 => Some(0.0),
            1 => self
                .terms
                .iter()
                .next()
                .filter(|(e, _)| e.iter().all(|&k| k == 0))
                .map(|(_, &c)| c),
            _ => None,
        }
    }

    /// Whether the polynomial involves variable `i`.
    pub fn depends_on(&self, i: usize) -> bool {
        self.terms.keys().any(|e| e[i] > 0)
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|e| e.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| {
                c * e
                    .iter()
                    .zip(x)
                    .map(|(&k, &v)| v.powi(k as i32))
                    .product::<f64>()
            })
            .sum()
    }

    pub fn derivative(&self, i: usize) -> Self {
        let mut out = Self::zero(self.dim);
        for (e, &c) in &self.terms {
            if e[i] > 0 {
                let mut e2 = e.clone();
                e2[i] -= 1;
                out.add_term(e2, c * e[i] as f64);
            }
        }
        out
    }

    fn add_term(&mut self, e: Vec<u32>, c: f64) {
        let entry = self.terms.entry(e).or_insert(0.0);
        *entry += c;
        if *entry == 0.0 {
            self.terms.retain(|_, v| *v != 0.0);
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (e, &c) in &other.terms {
            out.add_term(e.clone(), c);
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = Self::zero(self.dim);
        if s != 0.0 {
            for (e, &c) in &self.terms {
                out.terms.insert(e.clone(), c * s);
            }
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero(self.dim);
        for (e1, &c1) in &self.terms {
            for (e2, &c2) in &other.terms {
                let e: Vec<u32> = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                out.add_term(e, c1 * c2);
            }
        }
        out
    }

    /// Embed into a space with more variables (new variables appended).
    pub fn lift(&self, dim: usize) -> Self {
        assert!(dim >= self.dim);
        let mut out = Self::zero(dim);
        for (e, &c) in &self.terms {
            let mut e2 = e.clone();
            e2.resize(dim, 0);
            out.terms.insert(e2, c);
        }
        out
    }
}

/// A first-order differential operator `Σ_k c_k(x) ∂_k` with polynomial coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    pub coeffs: Vec<Polynomial>,
}

impl VectorField {
    /// `∂_i` in `dim` variables.
    pub fn coordinate(dim: usize, i: usize) -> Self {
        let coeffs = (0..dim)
            .map(|k| {
                if k == i {
                    Polynomial::constant(dim, 1.0)
                } else {
                    Polynomial::zero(dim)
                }
            })
            .collect();
        Self { coeffs }
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn apply(&self, u: &Polynomial) -> Polynomial {
        self.coeffs
            .iter()
            .enumerate()
            .fold(Polynomial::zero(u.dim()), |acc, (k, c)| {
                acc.add(&c.mul(&u.derivative(k)))
            })
    }

    /// `[X, Y]u = X(Yu) − Y(Xu)`.
    pub fn commutator_apply(&self, other: &Self, u: &Polynomial) -> Polynomial {
        self.apply(&other.apply(u)).sub(&other.apply(&self.apply(u)))
    }

    pub fn eval_coeffs(&self, x: &[f64]) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.eval(x)).collect()
    }

    pub fn lift(&self, dim: usize) -> Self {
        let mut coeffs: Vec<Polynomial> = self.coeffs.iter().map(|c| c.lift(dim)).collect();
        coeffs.resize(dim, Polynomial::zero(dim));
        Self { coeffs }
    }

    /// The flow line `s ↦ exp(sX)(p)` is a straight line when every coefficient
    /// is constant along it: no coefficient depends on a coordinate the field moves.
    pub fn has_straight_flow(&self) -> bool {
        let moved: Vec<usize> = (0..self.dim())
            .filter(|&k| !self.coeffs[k].is_zero())
            .collect();
        self.coeffs
            .iter()
            .all(|c| moved.iter().all(|&k| !c.depends_on(k)))
    }
}
