//! Monomial dictionaries over full-state or delay-embedded variables.

use std::collections::HashMap;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::polynomial::MultiIndex;
use crate::scalar::Real;

/// How a dictionary's variables relate to the physical state.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DictionaryKind {
    /// Monomials in the `D` state coordinates up to `max_degree`.
    FullState { max_degree: u32 },
    /// Monomials in the delay variables `z_1 = x_d(t), ..., z_{M+1} = x_d(t − MΔt)`.
    Delay { m: usize, max_degree: u32 },
}

/// Ordered monomial basis. The first element is always the constant.
#[derive(Clone, Debug)]
pub struct Dictionary {
    variable_count: usize,
    basis: Vec<MultiIndex>,
    kind: DictionaryKind,
    lookup: HashMap<MultiIndex, usize>,
}

impl PartialEq for Dictionary {
    fn eq(&self, other: &Self) -> bool {
        self.variable_count == other.variable_count
            && self.kind == other.kind
            && self.basis == other.basis
    }
}

/// Every multi-index over `vars` variables with total degree exactly `degree`,
/// in descending lexicographic order.
fn indices_of_degree(vars: usize, degree: u32) -> Vec<Vec<u32>> {
    if vars == 1 {
        return vec![vec![degree]];
    }
    let mut out = Vec::new();
    for first in (0..=degree).rev() {
        for mut rest in indices_of_degree(vars - 1, degree - first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

fn graded_basis(vars: usize, max_degree: u32) -> Vec<MultiIndex> {
    (0..=max_degree)
        .flat_map(|k| indices_of_degree(vars, k))
        .map(MultiIndex::new)
        .collect()
}

/// All monomials in `V` variables of total degree at most `max_degree`,
/// graded-lex ordered (`C(V + p, p)` elements).
pub fn monomial_dictionary(variable_count: usize, max_degree: u32) -> Result<Dictionary> {
    if variable_count == 0 {
        return Err(Error::InvalidArgument("dictionary needs at least one variable".into()));
    }
    Dictionary::from_parts(
        variable_count,
        graded_basis(variable_count, max_degree),
        DictionaryKind::FullState { max_degree },
    )
}

/// Monomials of degree ≤ 2 (or ≤ 1) in the `M + 1` delay variables.
pub fn delay_dictionary(m: usize, max_degree: u32) -> Result<Dictionary> {
    if !(1..=2).contains(&max_degree) {
        return Err(Error::InvalidArgument(format!(
            "delay dictionary degree must be 1 or 2, got {max_degree}"
        )));
    }
    Dictionary::from_parts(m + 1, graded_basis(m + 1, max_degree), DictionaryKind::Delay { m, max_degree })
}

impl Dictionary {
    fn from_parts(variable_count: usize, basis: Vec<MultiIndex>, kind: DictionaryKind) -> Result<Self> {
        if basis.first().map_or(true, |b| !b.is_constant()) {
            return Err(Error::InvalidArgument("first basis element must be the constant".into()));
        }
        if !basis.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidArgument(
                "basis must be unique and graded-lex sorted".into(),
            ));
        }
        if let Some(b) = basis.iter().find(|b| b.dim() != variable_count) {
            return Err(Error::DimensionMismatch {
                expected: variable_count,
                found: b.dim(),
                context: "dictionary multi-index length",
            });
        }
        let lookup = basis.iter().cloned().enumerate().map(|(i, b)| (b, i)).collect();
        Ok(Dictionary {
            variable_count,
            basis,
            kind,
            lookup,
        })
    }

    pub fn variable_count(&self) -> usize {
        self.variable_count
    }

    pub fn kind(&self) -> DictionaryKind {
        self.kind
    }

    pub fn basis(&self) -> &[MultiIndex] {
        &self.basis
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn max_degree(&self) -> u32 {
        match self.kind {
            DictionaryKind::FullState { max_degree } | DictionaryKind::Delay { max_degree, .. } => max_degree,
        }
    }

    pub fn index_of(&self, index: &MultiIndex) -> Option<usize> {
        self.lookup.get(index).copied()
    }

    /// Position of the linear monomial in variable `d`.
    pub fn linear_index(&self, d: usize) -> Option<usize> {
        (d < self.variable_count)
            .then(|| self.index_of(&MultiIndex::unit(self.variable_count, d)))
            .flatten()
    }

    /// Positions of the linear monomials, i.e. the full-state observable `g`.
    pub fn linear_indices(&self) -> Vec<usize> {
        (0..self.variable_count).filter_map(|d| self.linear_index(d)).collect()
    }

    fn var_name(&self) -> &'static str {
        match self.kind {
            DictionaryKind::FullState { .. } => "x",
            DictionaryKind::Delay { .. } => "z",
        }
    }

    pub fn labels(&self) -> Vec<String> {
        let v = self.var_name();
        self.basis.iter().map(|b| b.label(v)).collect()
    }

    /// Feature vector `ψ(x)` of a single point.
    pub fn evaluate_point<T: Real>(&self, x: &[T]) -> Result<DVector<T>> {
        if x.len() != self.variable_count {
            return Err(Error::DimensionMismatch {
                expected: self.variable_count,
                found: x.len(),
                context: "dictionary evaluation point",
            });
        }
        let mut out = DVector::zeros(self.len());
        let powers = self.power_table(x);
        self.fill_row(&powers, |i, v| out[i] = v);
        Ok(out)
    }

    /// Feature matrix: row `n` is `ψ(points[n, :])`.
    pub fn evaluate<T: Real>(&self, points: &DMatrix<T>) -> Result<DMatrix<T>> {
        if points.ncols() != self.variable_count {
            return Err(Error::DimensionMismatch {
                expected: self.variable_count,
                found: points.ncols(),
                context: "dictionary evaluation columns",
            });
        }
        let mut out = DMatrix::zeros(points.nrows(), self.len());
        let mut x = vec![T::zero(); self.variable_count];
        for n in 0..points.nrows() {
            for (d, xd) in x.iter_mut().enumerate() {
                *xd = points[(n, d)];
            }
            let powers = self.power_table(&x);
            self.fill_row(&powers, |i, v| out[(n, i)] = v);
        }
        Ok(out)
    }

    fn power_table<T: Real>(&self, x: &[T]) -> Vec<Vec<T>> {
        let p = self.max_degree() as usize;
        x.iter()
            .map(|&xi| {
                let mut row = Vec::with_capacity(p + 1);
                let mut acc = T::one();
                row.push(acc);
                for _ in 0..p {
                    acc *= xi;
                    row.push(acc);
                }
                row
            })
            .collect()
    }

    fn fill_row<T: Real>(&self, powers: &[Vec<T>], mut put: impl FnMut(usize, T)) {
        for (i, b) in self.basis.iter().enumerate() {
            let v = b
                .exponents()
                .iter()
                .enumerate()
                .filter(|(_, &n)| n > 0)
                .fold(T::one(), |acc, (d, &n)| acc * powers[d][n as usize]);
            put(i, v);
        }
    }

    /// Factorial normalization `Π n_d!` of each basis element under the
    /// dual pairing `⟨n|m⟩ = Π n_d! δ_{n,m}`.
    pub fn dual_normalization<T: Real>(&self) -> DualNormalization<T> {
        DualNormalization {
            z_diag: self.basis.iter().map(|b| T::lit(b.factorial_product())).collect(),
        }
    }

    /// Text manifest: one comment header line, then one multi-index per line.
    pub fn to_manifest(&self) -> String {
        let mut s = match self.kind {
            DictionaryKind::FullState { max_degree } => format!(
                "# dictionary kind=full_state variables={} max_degree={max_degree}\n",
                self.variable_count
            ),
            DictionaryKind::Delay { m, max_degree } => {
                format!("# dictionary kind=delay m={m} max_degree={max_degree}\n")
            }
        };
        for b in &self.basis {
            let line: Vec<String> = b.exponents().iter().map(u32::to_string).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
        s
    }

    pub fn from_manifest(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "empty dictionary manifest".into(),
        })?;
        let fields: HashMap<&str, &str> = header
            .trim_start_matches('#')
            .split_whitespace()
            .filter_map(|kv| kv.split_once('='))
            .collect();
        let num = |k: &str| -> Result<usize> {
            fields
                .get(k)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::Parse {
                    line: 1,
                    message: format!("missing or invalid header field `{k}`"),
                })
        };
        let kind = match fields.get("kind").copied() {
            Some("full_state") => DictionaryKind::FullState {
                max_degree: num("max_degree")? as u32,
            },
            Some("delay") => DictionaryKind::Delay {
                m: num("m")?,
                max_degree: num("max_degree")? as u32,
            },
            _ => {
                return Err(Error::Parse {
                    line: 1,
                    message: "header must declare kind=full_state or kind=delay".into(),
                })
            }
        };
        let variable_count = match kind {
            DictionaryKind::FullState { .. } => num("variables")?,
            DictionaryKind::Delay { m, .. } => m + 1,
        };
        let mut basis = Vec::new();
        for (i, line) in lines {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let e = line
                .split_whitespace()
                .map(str::parse::<u32>)
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse {
                    line: i + 1,
                    message: e.to_string(),
                })?;
            basis.push(MultiIndex::new(e));
        }
        Dictionary::from_parts(variable_count, basis, kind)
    }
}

/// Diagonal of the dual-basis Gram matrix `Z`.
#[derive(Clone, Debug, PartialEq)]
pub struct DualNormalization<T> {
    pub z_diag: Vec<T>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binomial(n: u64, k: u64) -> u64 {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn two_variable_degree_five() {
        let d = monomial_dictionary(2, 5).unwrap();
        assert_eq!(d.len(), 21);
        assert_eq!(&d.labels()[..6], ["1", "x1", "x2", "x1^2", "x1*x2", "x2^2"]);
        assert_eq!(d.labels()[20], "x2^5");
    }

    #[test]
    fn lorenz_sizes() {
        assert_eq!(monomial_dictionary(3, 6).unwrap().len(), 84);
        assert_eq!(monomial_dictionary(1, 0).unwrap().len(), 1);
        let d = monomial_dictionary(3, 2).unwrap();
        assert_eq!(
            d.labels(),
            ["1", "x1", "x2", "x3", "x1^2", "x1*x2", "x1*x3", "x2^2", "x2*x3", "x3^2"]
        );
    }

    #[test]
    fn count_identity_by_brute_force() {
        for v in 1..=4usize {
            for p in 0..=8u32 {
                let d = monomial_dictionary(v, p).unwrap();
                assert_eq!(d.len() as u64, binomial(v as u64 + u64::from(p), u64::from(p)));
                // brute enumeration of the box [0, p]^v
                let total = (0..(p as usize + 1).pow(v as u32))
                    .filter(|&code| {
                        let mut c = code;
                        let mut s = 0;
                        for _ in 0..v {
                            s += c % (p as usize + 1);
                            c /= p as usize + 1;
                        }
                        s <= p as usize
                    })
                    .count();
                assert_eq!(d.len(), total);
                assert!(d.basis().windows(2).all(|w| w[0] < w[1]));
            }
        }
    }

    #[test]
    fn delay_dictionaries() {
        let d = delay_dictionary(1, 2).unwrap();
        assert_eq!(d.labels(), ["1", "z1", "z2", "z1^2", "z1*z2", "z2^2"]);
        assert_eq!(delay_dictionary(8, 2).unwrap().len(), 55);
        assert_eq!(delay_dictionary(8, 1).unwrap().len(), 10);
        assert!(delay_dictionary(2, 3).is_err());
        assert!(delay_dictionary(2, 0).is_err());
    }

    #[test]
    fn evaluation_examples() {
        let d = monomial_dictionary(2, 2).unwrap();
        let pts = DMatrix::from_row_slice(2, 2, &[2.0, 3.0, 0.0, 0.0]);
        let f = d.evaluate(&pts).unwrap();
        let xy = d.index_of(&MultiIndex::new(vec![1, 1])).unwrap();
        assert_eq!(f[(0, xy)], 6.0);
        assert_eq!(f[(0, 0)], 1.0);
        assert_eq!(f.row(1).iter().copied().collect::<Vec<_>>(), vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(d.evaluate(&DMatrix::<f64>::zeros(1, 3)).is_err());
    }

    #[test]
    fn evaluation_is_multiplicative() {
        let d = monomial_dictionary(3, 4).unwrap();
        let x = [0.37f64, -1.21, 0.83];
        let f = d.evaluate_point(&x).unwrap();
        for (i, a) in d.basis().iter().enumerate() {
            for (j, b) in d.basis().iter().enumerate() {
                if let Some(k) = d.index_of(&a.plus(b)) {
                    assert!((f[k] - f[i] * f[j]).abs() <= 1e-14 * (1.0 + f[k].abs()));
                }
            }
        }
    }

    #[test]
    fn dual_normalization_factorials() {
        let d = monomial_dictionary(2, 3).unwrap();
        let z: DualNormalization<f64> = d.dual_normalization();
        let at = |e: &[u32]| z.z_diag[d.index_of(&MultiIndex::new(e.to_vec())).unwrap()];
        assert_eq!(at(&[2, 1]), 2.0);
        assert_eq!(at(&[1, 0]), 1.0);
        assert_eq!(at(&[3, 0]), 6.0);
        assert_eq!(at(&[0, 0]), 1.0);
    }

    #[test]
    fn manifest_round_trip() {
        for d in [monomial_dictionary(3, 4).unwrap(), delay_dictionary(5, 2).unwrap()] {
            let text = d.to_manifest();
            let back = Dictionary::from_manifest(&text).unwrap();
            assert_eq!(back, d);
        }
        assert!(Dictionary::from_manifest("# dictionary kind=delay m=1 max_degree=2\n0 0\n1 x\n").is_err());
    }

    #[test]
    fn linear_slice() {
        let d = monomial_dictionary(3, 3).unwrap();
        assert_eq!(d.linear_indices(), vec![1, 2, 3]);
    }
}
