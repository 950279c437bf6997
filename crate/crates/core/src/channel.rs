//! Jakes spatial covariance of a linear port array, its spectrum, and the
//! coloring factor used to draw correlated channels.

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::error::{domain, Error, Result};
use crate::linalg::{jacobi_eigen, Matrix};
use crate::specfun::j0;

/// One user's antenna: `num_ports` ports spread evenly over `aperture`
/// wavelengths, with average channel power `mean_gain`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FasGeometry {
    num_ports: usize,
    aperture: f64,
    mean_gain: f64,
}

impl FasGeometry {
    pub fn new(num_ports: usize, aperture: f64, mean_gain: f64) -> Result<Self> {
        if num_ports < 2 {
            return domain(format!("port count must be at least 2, got {num_ports}"));
        }
        if !(aperture.is_finite() && aperture > 0.0) {
            return domain(format!("aperture must be positive, got {aperture}"));
        }
        if !(mean_gain.is_finite() && mean_gain > 0.0) {
            return domain(format!("mean gain must be positive, got {mean_gain}"));
        }
        Ok(FasGeometry {
            num_ports,
            aperture,
            mean_gain,
        })
    }

    pub fn num_ports(&self) -> usize {
        self.num_ports
    }

    pub fn aperture(&self) -> f64 {
        self.aperture
    }

    pub fn mean_gain(&self) -> f64 {
        self.mean_gain
    }

    /// Port spacing in wavelengths.
    pub fn spacing(&self) -> f64 {
        self.aperture / (self.num_ports - 1) as f64
    }

    fn coefficient_at_lag(&self, lag: usize) -> f64 {
        j0(2.0 * PI * lag as f64 * self.spacing())
    }
}

/// Correlation between ports `k` and `l` (1-based).
pub fn jakes_coefficient(k: usize, l: usize, geom: &FasGeometry) -> Result<f64> {
    let n = geom.num_ports();
    if k == 0 || l == 0 || k > n || l > n {
        return domain(format!("port indices ({k}, {l}) outside 1..={n}"));
    }
    Ok(geom.coefficient_at_lag(k.abs_diff(l)))
}

/// A symmetric covariance matrix together with the mean gain it is scaled by.
#[derive(Debug, Clone, PartialEq)]
pub struct Covariance {
    entries: Matrix,
    mean_gain: f64,
}

impl Covariance {
    /// Wraps an arbitrary square matrix; the mean gain is taken as the
    /// average diagonal entry.
    pub fn from_matrix(entries: Matrix) -> Result<Self> {
        if entries.dim() == 0 {
            return domain("covariance must have at least one row");
        }
        if entries.as_slice().iter().any(|v| !v.is_finite()) {
            return domain("covariance entries must be finite");
        }
        let mean_gain = entries.trace() / entries.dim() as f64;
        Ok(Covariance { entries, mean_gain })
    }

    pub fn dim(&self) -> usize {
        self.entries.dim()
    }

    pub fn mean_gain(&self) -> f64 {
        self.mean_gain
    }

    pub fn entries(&self) -> &Matrix {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace()
    }

    /// Row-major CSV preceded by a `# dim=N eta=<mean gain>` header line.
    /// Values are written in shortest round-trip form.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# dim={} eta={}", self.dim(), self.mean_gain);
        for i in 0..self.dim() {
            let row: Vec<String> = self.entries.row(i).iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty covariance CSV".into()))?;
        let header = header
            .strip_prefix('#')
            .ok_or_else(|| Error::Parse("covariance CSV must start with a '#' header".into()))?;
        let mut dim = None;
        let mut eta = None;
        for field in header.split_whitespace() {
            match field.split_once('=') {
                Some(("dim", v)) => {
                    dim = Some(v.parse::<usize>().map_err(|e| Error::Parse(format!("dim: {e}")))?)
                }
                Some(("eta", v)) => {
                    eta = Some(v.parse::<f64>().map_err(|e| Error::Parse(format!("eta: {e}")))?)
                }
                _ => return Err(Error::Parse(format!("unexpected header field '{field}'"))),
            }
        }
        let dim = dim.ok_or_else(|| Error::Parse("header is missing dim".into()))?;
        let eta = eta.ok_or_else(|| Error::Parse("header is missing eta".into()))?;
        let mut rows = Vec::with_capacity(dim);
        for line in lines {
            let row = line
                .split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(format!("entry '{v}': {e}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        if rows.len() != dim {
            return Err(Error::Dimension {
                expected: dim,
                found: rows.len(),
            });
        }
        let entries = Matrix::from_rows(&rows)?;
        let mut cov = Covariance::from_matrix(entries)?;
        cov.mean_gain = eta;
        Ok(cov)
    }
}

/// `mean_gain * J0(2 pi |k-l| W/(N-1))`, filled by lag so the result is
/// exactly Toeplitz.
pub fn build_covariance(geom: &FasGeometry) -> Covariance {
    let n = geom.num_ports();
    let eta = geom.mean_gain();
    let by_lag: Vec<f64> = (0..n)
        .map(|lag| {
            if lag == 0 {
                eta
            } else {
                eta * geom.coefficient_at_lag(lag)
            }
        })
        .collect();
    Covariance {
        entries: Matrix::from_fn(n, |i, j| by_lag[i.abs_diff(j)]),
        mean_gain: eta,
    }
}

/// Eigenvalues in descending order plus the gain they are measured against.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
    mean_gain: f64,
}

impl Spectrum {
    /// Sorts `values` descending. Values must be finite and non-empty.
    pub fn new(mut values: Vec<f64>, mean_gain: f64) -> Result<Self> {
        if values.is_empty() {
            return domain("spectrum must contain at least one eigenvalue");
        }
        if values.iter().any(|v| !v.is_finite()) {
            return domain("eigenvalues must be finite");
        }
        if !(mean_gain.is_finite() && mean_gain > 0.0) {
            return domain(format!("mean gain must be positive, got {mean_gain}"));
        }
        values.sort_by(|a, b| b.total_cmp(a));
        Ok(Spectrum {
            eigenvalues: values,
            mean_gain,
        })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn mean_gain(&self) -> f64 {
        self.mean_gain
    }

    pub fn sum(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }
}

/// Spectrum together with the orthogonal eigenvector matrix (columns in the
/// same order as the eigenvalues).
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub spectrum: Spectrum,
    pub vectors: Matrix,
}

const SYMMETRY_TOLERANCE: f64 = 1e-12;

pub fn eigen_decompose(cov: &Covariance) -> Result<EigenDecomposition> {
    let (row, col, gap) = cov.entries.max_asymmetry();
    if gap > SYMMETRY_TOLERANCE || gap.is_nan() {
        return Err(Error::NotSymmetric { row, col, gap });
    }
    let eig = jacobi_eigen(&cov.entries)?;
    Ok(EigenDecomposition {
        spectrum: Spectrum {
            eigenvalues: eig.values,
            mean_gain: cov.mean_gain,
        },
        vectors: eig.vectors,
    })
}

pub fn eigen_spectrum(cov: &Covariance) -> Result<Spectrum> {
    Ok(eigen_decompose(cov)?.spectrum)
}

/// Below `-PSD_ERROR_FRACTION * mean_gain` an eigenvalue is an error rather
/// than rounding noise.
pub const PSD_ERROR_FRACTION: f64 = 1e-6;

/// `F = V diag(sqrt(max(lambda, 0)))`, so that `F F^T` reproduces the
/// covariance with tiny negative eigenvalues clipped to zero.
pub fn coloring_factor(cov: &Covariance) -> Result<Matrix> {
    let EigenDecomposition { spectrum, vectors } = eigen_decompose(cov)?;
    let threshold = -PSD_ERROR_FRACTION * cov.mean_gain.abs();
    let mut roots = Vec::with_capacity(spectrum.len());
    for &lambda in spectrum.eigenvalues() {
        if lambda < threshold {
            return Err(Error::NotPositiveSemidefinite {
                eigenvalue: lambda,
                threshold,
            });
        }
        roots.push(lambda.max(0.0).sqrt());
    }
    Ok(Matrix::from_fn(cov.dim(), |i, j| vectors[(i, j)] * roots[j]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometry_validation() {
        assert!(FasGeometry::new(1, 1.0, 1.0).is_err());
        assert!(FasGeometry::new(2, 0.0, 1.0).is_err());
        assert!(FasGeometry::new(2, 1.0, -1.0).is_err());
        assert!(FasGeometry::new(2, f64::NAN, 1.0).is_err());
        let g = FasGeometry::new(5, 2.0, 1.0).unwrap();
        assert_eq!(g.spacing(), 0.5);
    }

    #[test]
    fn jakes_examples() {
        let g = FasGeometry::new(5, 2.0, 1.0).unwrap();
        assert_eq!(jakes_coefficient(3, 3, &g).unwrap(), 1.0);
        assert!((jakes_coefficient(1, 2, &g).unwrap() + 0.3042).abs() < 1e-4);
        assert!(jakes_coefficient(0, 1, &g).is_err());
        assert!(jakes_coefficient(1, 6, &g).is_err());
        let g = FasGeometry::new(21, 5.0, 1.0).unwrap();
        assert!((jakes_coefficient(4, 3, &g).unwrap() - 0.4720).abs() < 1e-4);
    }

    #[test]
    fn covariance_structure() {
        let g = FasGeometry::new(5, 2.0, 1.5).unwrap();
        let c = build_covariance(&g);
        assert!((c.trace() - 7.5).abs() < 1e-12);
        assert_eq!(c.get(0, 2), c.get(1, 3));
        assert_eq!(c.get(1, 3), c.get(2, 4));
        let g = FasGeometry::new(2, 0.5, 1.0).unwrap();
        let c = build_covariance(&g);
        assert_eq!(c.get(0, 0), 1.0);
        assert_eq!(c.get(0, 1), j0(PI));
        assert_eq!(c.get(1, 0), j0(PI));
    }

    #[test]
    fn constant_correlation_spectrum() {
        let m = Matrix::from_fn(4, |i, j| if i == j { 1.0 } else { 0.5 });
        let s = eigen_spectrum(&Covariance::from_matrix(m).unwrap()).unwrap();
        let expect = [2.5, 0.5, 0.5, 0.5];
        for (a, b) in s.eigenvalues().iter().zip(expect) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn asymmetric_input_rejected() {
        let m = Matrix::from_rows(&[vec![1.0, 0.2], vec![0.2 + 1e-9, 1.0]]).unwrap();
        let c = Covariance::from_matrix(m).unwrap();
        assert!(matches!(eigen_spectrum(&c), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn coloring_identity_and_rank_one() {
        let c = Covariance::from_matrix(Matrix::identity(3)).unwrap();
        assert_eq!(coloring_factor(&c).unwrap(), Matrix::identity(3));

        let m = Matrix::from_fn(2, |_, _| 2.0);
        let c = Covariance::from_matrix(m.clone()).unwrap();
        let f = coloring_factor(&c).unwrap();
        assert!(f[(0, 1)].abs() < 1e-7 && f[(1, 1)].abs() < 1e-7);
        let back = f.matmul(&f.transpose()).unwrap();
        assert!(back.frobenius_distance(&m) < 1e-12);
    }

    #[test]
    fn indefinite_matrix_rejected() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        let c = Covariance::from_matrix(m).unwrap();
        assert!(matches!(
            coloring_factor(&c),
            Err(Error::NotPositiveSemidefinite { .. })
        ));
    }

    #[test]
    fn csv_round_trip() {
        let g = FasGeometry::new(6, 1.7, 0.8).unwrap();
        let c = build_covariance(&g);
        let text = c.to_csv();
        assert!(text.starts_with("# dim=6 eta=0.8\n"));
        let back = Covariance::from_csv(&text).unwrap();
        assert_eq!(back, c);
        assert!(Covariance::from_csv("1,2\n3,4\n").is_err());
        assert!(Covariance::from_csv("# dim=2 eta=1\n1,0\n").is_err());
    }
}
