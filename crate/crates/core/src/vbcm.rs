//! Variable block-correlation fitting.
//!
//! A covariance spectrum is approximated by a block-diagonal matrix whose
//! blocks have unit diagonal and a constant off-diagonal correlation. A
//! block of size `L` with correlation `rho` has eigenvalues `1 + (L-1) rho`
//! (once) and `1 - rho` (`L-1` times), so the fit pairs the largest
//! eigenvalues with block "dominant" eigenvalues and distributes the rest
//! greedily. Fitting works on eigenvalues divided by the mean gain; the
//! partition keeps the source-scale values.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rayon::prelude::*;

use crate::channel::{build_covariance, eigen_spectrum, Covariance, FasGeometry, Spectrum};
use crate::error::{domain, Error, Result};
use crate::linalg::Matrix;

/// How the per-block correlation is solved from its eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub enum FitMode {
    /// Exact minimizer of the block assignment error.
    #[default]
    LeastSquares,
    /// Denominator `2(L-1)` instead of `L(L-1)`; agrees with least squares
    /// only for two-port blocks.
    AsPrinted,
}

impl FromStr for FitMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "least_squares" | "ls" => Ok(FitMode::LeastSquares),
            "as_printed" | "printed" => Ok(FitMode::AsPrinted),
            other => Err(Error::Parse(format!(
                "unknown fit mode '{other}' (expected least_squares or as_printed)"
            ))),
        }
    }
}

impl fmt::Display for FitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FitMode::LeastSquares => "least_squares",
            FitMode::AsPrinted => "as_printed",
        })
    }
}

/// Correlation minimizing the assignment error of a block with dominant
/// eigenvalue `dominant` and the other eigenvalues `tail`, clamped to [0, 1].
pub fn optimal_rho(dominant: f64, tail: &[f64], mode: FitMode) -> Result<f64> {
    if tail.is_empty() {
        return domain("optimal_rho needs at least one non-dominant eigenvalue");
    }
    Ok(rho_unchecked(dominant, tail, mode))
}

fn rho_unchecked(dominant: f64, tail: &[f64], mode: FitMode) -> f64 {
    let m = tail.len() as f64; // L - 1
    let numerator = m * dominant - tail.iter().sum::<f64>();
    let denominator = match mode {
        FitMode::LeastSquares => (m + 1.0) * m,
        FitMode::AsPrinted => 2.0 * m,
    };
    (numerator / denominator).clamp(0.0, 1.0)
}

/// `(1 + rho (L-1) - dominant)^2 + sum_k (lambda_k - 1 + rho)^2` with
/// `L = |tail| + 1`.
pub fn assignment_error(dominant: f64, tail: &[f64], rho: f64) -> f64 {
    let m = tail.len() as f64;
    let lead = 1.0 + rho * m - dominant;
    lead * lead
        + tail
            .iter()
            .map(|&l| {
                let r = l - 1.0 + rho;
                r * r
            })
            .sum::<f64>()
}

/// One constant-correlation block.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    /// Correlation in [0, 1]. Singleton blocks carry 1 and it is never used.
    pub rho: f64,
    /// The dominant eigenvalue seeding this block (source scale).
    pub dominant: f64,
    /// Eigenvalues assigned to this block besides the dominant one.
    pub tail: Vec<f64>,
}

impl Block {
    pub fn size(&self) -> usize {
        self.tail.len() + 1
    }

    /// Eigenvalues of `eta * A` for this block, descending when rho >= 0.
    pub fn model_eigenvalues(&self, eta: f64) -> impl Iterator<Item = f64> + '_ {
        let m = self.tail.len();
        std::iter::once(eta * (1.0 + self.rho * m as f64))
            .chain(std::iter::repeat_n(eta * (1.0 - self.rho), m))
    }
}

/// Fitted block structure for one spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockPartition {
    blocks: Vec<Block>,
    source: Spectrum,
    distance: f64,
    assignment_error: f64,
    evaluations: usize,
}

impl BlockPartition {
    /// Builds a partition from explicit blocks. Dominant and tail values
    /// must together be the source spectrum.
    pub fn from_blocks(source: &Spectrum, blocks: Vec<Block>) -> Result<Self> {
        if blocks.is_empty() {
            return domain("a partition needs at least one block");
        }
        for (i, b) in blocks.iter().enumerate() {
            if !(0.0..=1.0).contains(&b.rho) {
                return domain(format!("block {} correlation {} outside [0, 1]", i + 1, b.rho));
            }
        }
        let mut members: Vec<f64> = blocks
            .iter()
            .flat_map(|b| std::iter::once(b.dominant).chain(b.tail.iter().copied()))
            .collect();
        if members.len() != source.len() {
            return Err(Error::Dimension {
                expected: source.len(),
                found: members.len(),
            });
        }
        members.sort_by(|a, b| b.total_cmp(a));
        let eta = source.mean_gain();
        if members
            .iter()
            .zip(source.eigenvalues())
            .any(|(a, b)| (a - b).abs() > 1e-12 * eta.max(b.abs()))
        {
            return domain("block eigenvalues do not match the source spectrum");
        }
        Ok(Self::assemble(source.clone(), blocks, 0))
    }

    fn assemble(source: Spectrum, blocks: Vec<Block>, evaluations: usize) -> Self {
        let eta = source.mean_gain();
        let assignment_error = blocks
            .iter()
            .map(|b| assignment_error(b.dominant / eta, &scaled(&b.tail, eta), b.rho))
            .sum::<f64>()
            * eta
            * eta;
        let mut partition = BlockPartition {
            blocks,
            source,
            distance: 0.0,
            assignment_error,
            evaluations,
        };
        partition.distance = sorted_distance(partition.source.eigenvalues(), &partition.model_eigenvalues());
        partition
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(Block::size).collect()
    }

    pub fn rhos(&self) -> Vec<f64> {
        self.blocks.iter().map(|b| b.rho).collect()
    }

    pub fn source_dim(&self) -> usize {
        self.source.len()
    }

    pub fn source(&self) -> &Spectrum {
        &self.source
    }

    pub fn mean_gain(&self) -> f64 {
        self.source.mean_gain()
    }

    /// Squared distance between the sorted source spectrum and the sorted
    /// spectrum of the reconstructed block-diagonal covariance.
    pub fn distance(&self) -> f64 {
        self.distance
    }

    /// Sum of the per-block assignment errors at source scale; pairs each
    /// eigenvalue with its own block's model eigenvalue, so it bounds
    /// `distance()` from above.
    pub fn assignment_error(&self) -> f64 {
        self.assignment_error
    }

    /// Assignment-error evaluations spent by the greedy fit (0 for
    /// partitions assembled from explicit blocks).
    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    fn model_eigenvalues(&self) -> Vec<f64> {
        let eta = self.mean_gain();
        self.blocks.iter().flat_map(|b| b.model_eigenvalues(eta)).collect()
    }

    /// Spectrum of the reconstructed covariance.
    pub fn model_spectrum(&self) -> Spectrum {
        Spectrum::new(self.model_eigenvalues(), self.mean_gain())
            .expect("model eigenvalues are finite")
    }

    /// Plain-text record: a `#` header line, then one CSV row per block
    /// (`size,rho,dominant,tail` with the tail `;`-separated).
    pub fn to_record(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# partition dim={} eta={} blocks={} distance={}",
            self.source_dim(),
            self.mean_gain(),
            self.num_blocks(),
            self.distance
        );
        let _ = writeln!(out, "size,rho,dominant,tail");
        for b in &self.blocks {
            let tail: Vec<String> = b.tail.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{},{},{},{}", b.size(), b.rho, b.dominant, tail.join(";"));
        }
        out
    }

    pub fn from_record(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines
            .next()
            .and_then(|l| l.strip_prefix("# partition"))
            .ok_or_else(|| Error::Parse("missing '# partition' header".into()))?;
        let mut eta = None;
        for field in header.split_whitespace() {
            if let Some(v) = field.strip_prefix("eta=") {
                eta = Some(parse_f64(v)?);
            }
        }
        let eta = eta.ok_or_else(|| Error::Parse("partition header is missing eta".into()))?;
        match lines.next() {
            Some("size,rho,dominant,tail") => {}
            other => return Err(Error::Parse(format!("unexpected column line {other:?}"))),
        }
        let mut blocks = Vec::new();
        let mut all = Vec::new();
        for line in lines {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 4 {
                return Err(Error::Parse(format!("block row '{line}' needs 4 columns")));
            }
            let size: usize = cols[0]
                .parse()
                .map_err(|e| Error::Parse(format!("size '{}': {e}", cols[0])))?;
            let rho = parse_f64(cols[1])?;
            let dominant = parse_f64(cols[2])?;
            let tail = if cols[3].is_empty() {
                Vec::new()
            } else {
                cols[3].split(';').map(parse_f64).collect::<Result<Vec<_>>>()?
            };
            if tail.len() + 1 != size {
                return Err(Error::Parse(format!("block size {size} disagrees with its tail")));
            }
            all.push(dominant);
            all.extend_from_slice(&tail);
            blocks.push(Block { rho, dominant, tail });
        }
        let source = Spectrum::new(all, eta)?;
        BlockPartition::from_blocks(&source, blocks)
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|e| Error::Parse(format!("number '{s}': {e}")))
}

fn scaled(values: &[f64], eta: f64) -> Vec<f64> {
    values.iter().map(|v| v / eta).collect()
}

fn sorted_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(|x, y| y.total_cmp(x));
    b.sort_by(|x, y| y.total_cmp(x));
    a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Greedy block fit with `num_blocks` blocks.
///
/// The `num_blocks` largest eigenvalues seed the blocks; every other
/// eigenvalue, largest first, joins the block whose assignment error (at
/// that block's optimal correlation) is smallest, lowest index on ties.
/// Exactly `(N - D) * D` assignment errors are evaluated.
pub fn fit_partition(spectrum: &Spectrum, num_blocks: usize, mode: FitMode) -> Result<BlockPartition> {
    let n = spectrum.len();
    if num_blocks == 0 || num_blocks > n {
        return domain(format!("block count {num_blocks} outside 1..={n}"));
    }
    let eta = spectrum.mean_gain();
    let values = scaled(spectrum.eigenvalues(), eta);
    let (dominants, rest) = values.split_at(num_blocks);

    let mut tails: Vec<Vec<f64>> = vec![Vec::new(); num_blocks];
    let mut rhos = vec![1.0; num_blocks];
    let mut evaluations = 0usize;
    let mut candidate = Vec::with_capacity(n);
    for &current in rest {
        let mut best: Option<(usize, f64, f64)> = None;
        for (d, &dominant) in dominants.iter().enumerate() {
            candidate.clear();
            candidate.extend_from_slice(&tails[d]);
            candidate.push(current);
            let rho = rho_unchecked(dominant, &candidate, mode);
            let err = assignment_error(dominant, &candidate, rho);
            evaluations += 1;
            if best.is_none_or(|(_, e, _)| err < e) {
                best = Some((d, err, rho));
            }
        }
        let (d, _, rho) = best.expect("at least one block");
        tails[d].push(current);
        rhos[d] = rho;
    }

    let blocks = (0..num_blocks)
        .map(|d| Block {
            rho: rhos[d],
            dominant: dominants[d] * eta,
            tail: tails[d].iter().map(|v| v * eta).collect(),
        })
        .collect();
    Ok(BlockPartition::assemble(spectrum.clone(), blocks, evaluations))
}

/// The block count in `1..=max_blocks` whose fit has the smallest spectral
/// distance; the smallest count wins ties.
pub fn auto_block_count(spectrum: &Spectrum, max_blocks: usize, mode: FitMode) -> Result<usize> {
    Ok(auto_fit(spectrum, max_blocks, mode)?.num_blocks())
}

/// Fit at the block count chosen by [`auto_block_count`].
pub fn auto_fit(spectrum: &Spectrum, max_blocks: usize, mode: FitMode) -> Result<BlockPartition> {
    let n = spectrum.len();
    if max_blocks == 0 || max_blocks > n {
        return domain(format!("maximum block count {max_blocks} outside 1..={n}"));
    }
    let fits: Vec<BlockPartition> = (1..=max_blocks)
        .into_par_iter()
        .map(|d| fit_partition(spectrum, d, mode))
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, fit) in fits.iter().enumerate() {
        if fit.distance() < fits[best].distance() {
            best = i;
        }
    }
    Ok(fits.into_iter().nth(best).expect("non-empty"))
}

/// How many blocks to fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockPolicy {
    /// A fixed count, reduced to the port count when larger.
    Fixed(usize),
    /// The distance-minimizing count up to `max_blocks` (all ports when
    /// `None`).
    Auto { max_blocks: Option<usize> },
}

impl Default for BlockPolicy {
    fn default() -> Self {
        BlockPolicy::Auto { max_blocks: None }
    }
}

impl BlockPolicy {
    pub fn fit(&self, spectrum: &Spectrum, mode: FitMode) -> Result<BlockPartition> {
        let n = spectrum.len();
        match *self {
            BlockPolicy::Fixed(d) => fit_partition(spectrum, d.min(n), mode),
            BlockPolicy::Auto { max_blocks } => {
                auto_fit(spectrum, max_blocks.unwrap_or(n).min(n), mode)
            }
        }
    }
}

impl FromStr for BlockPolicy {
    type Err = Error;
    /// `auto`, `auto:<max>` or a positive integer.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Parse(format!("block policy '{s}' is not 'auto', 'auto:<max>' or a count"));
        if s.eq_ignore_ascii_case("auto") {
            return Ok(BlockPolicy::Auto { max_blocks: None });
        }
        if let Some(max) = s.strip_prefix("auto:") {
            let max: usize = max.parse().map_err(|_| bad())?;
            if max == 0 {
                return Err(bad());
            }
            return Ok(BlockPolicy::Auto { max_blocks: Some(max) });
        }
        match s.parse::<usize>() {
            Ok(d) if d > 0 => Ok(BlockPolicy::Fixed(d)),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for BlockPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BlockPolicy::Fixed(d) => write!(f, "{d}"),
            BlockPolicy::Auto { max_blocks: None } => f.write_str("auto"),
            BlockPolicy::Auto { max_blocks: Some(m) } => write!(f, "auto:{m}"),
        }
    }
}

/// Jakes covariance of `geom`, its spectrum, and the block fit under
/// `policy`.
pub fn fit_geometry(geom: &FasGeometry, policy: BlockPolicy, mode: FitMode) -> Result<BlockPartition> {
    let spectrum = eigen_spectrum(&build_covariance(geom))?;
    policy.fit(&spectrum, mode)
}

/// Block-diagonal covariance with `eta` on the diagonal and `eta * rho_d`
/// inside block `d`.
pub fn reconstruct_covariance(partition: &BlockPartition, eta: f64) -> Covariance {
    let n = partition.source_dim();
    let mut m = Matrix::zeros(n);
    let mut start = 0;
    for b in partition.blocks() {
        let end = start + b.size();
        for i in start..end {
            for j in start..end {
                m[(i, j)] = if i == j { eta } else { eta * b.rho };
            }
        }
        start = end;
    }
    Covariance::from_matrix(m).expect("finite block matrix")
}

/// Squared Euclidean distance between two spectra, both sorted descending.
pub fn spectral_distance(a: &Spectrum, b: &Spectrum) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(sorted_distance(a.eigenvalues(), b.eigenvalues()))
}

/// Single block over all ports. With `rho = None` the correlation is the
/// least-squares fit; otherwise the given value is used as is.
pub fn constant_correlation_fit(spectrum: &Spectrum, rho: Option<f64>) -> Result<BlockPartition> {
    match rho {
        None => fit_partition(spectrum, 1, FitMode::LeastSquares),
        Some(r) => {
            if !(0.0..=1.0).contains(&r) {
                return domain(format!("fixed correlation {r} outside [0, 1]"));
            }
            let values = spectrum.eigenvalues();
            let block = Block {
                rho: r,
                dominant: values[0],
                tail: values[1..].to_vec(),
            };
            BlockPartition::from_blocks(spectrum, vec![block])
        }
    }
}

/// Keeps the block membership of `partition` but replaces all correlations
/// with the one shared value minimizing the summed assignment error.
pub fn shared_rho_refit(partition: &BlockPartition) -> BlockPartition {
    let eta = partition.mean_gain();
    let mut numerator = 0.0;
    let mut denominator = 0.0;
    for b in partition.blocks() {
        let m = b.tail.len() as f64;
        numerator += m * b.dominant / eta - b.tail.iter().sum::<f64>() / eta;
        denominator += (m + 1.0) * m;
    }
    let shared = if denominator > 0.0 {
        (numerator / denominator).clamp(0.0, 1.0)
    } else {
        1.0
    };
    let blocks = partition
        .blocks()
        .iter()
        .map(|b| Block {
            rho: shared,
            ..b.clone()
        })
        .collect();
    BlockPartition::assemble(partition.source().clone(), blocks, 0)
}
