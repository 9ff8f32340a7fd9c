//! Syndrome-based information reconciliation with LDPC codes.
//!
//! Node-1 segments its key into N-bit frames and broadcasts each frame's
//! syndrome `s = Hx`. A node holding a noisy copy runs sum-product decoding
//! constrained to that syndrome over its per-bit LLRs, which corrects
//! residual mismatches at a disclosure cost of N-K bits per frame. The
//! parity-check matrix ships in the plain-text alist sparse format so codes
//! can be swapped from the command line.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::llr::LLR_CLAMP;

/// Sparse GF(2) parity-check matrix with N columns and N-K rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParityCheckMatrix {
    n: usize,
    k: usize,
    /// Sorted column indices per check row.
    rows: Vec<Vec<u32>>,
    /// Sorted check indices per column.
    cols: Vec<Vec<u32>>,
}

impl ParityCheckMatrix {
    /// Builds a matrix from per-row column indices, validating that the
    /// dimensions are consistent and no row or column is empty.
    pub fn new(n: usize, rows: Vec<Vec<u32>>) -> Result<Self> {
        if n == 0 || rows.is_empty() || rows.len() >= n {
            return Err(Error::BadParityCheck(format!(
                "need 0 < rows < columns, got {} rows, {} columns",
                rows.len(),
                n
            )));
        }
        let mut cols: Vec<Vec<u32>> = vec![Vec::new(); n];
        let mut sorted_rows = Vec::with_capacity(rows.len());
        for (i, row) in rows.into_iter().enumerate() {
            if row.is_empty() {
                return Err(Error::BadParityCheck(format!("row {i} is empty")));
            }
            let mut row = row;
            row.sort_unstable();
            if row.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::BadParityCheck(format!(
                    "row {i} has a duplicate column"
                )));
            }
            if *row.last().unwrap() as usize >= n {
                return Err(Error::BadParityCheck(format!(
                    "row {i} references column {} of {n}",
                    row.last().unwrap()
                )));
            }
            for &j in &row {
                cols[j as usize].push(i as u32);
            }
            sorted_rows.push(row);
        }
        if let Some(j) = cols.iter().position(|c| c.is_empty()) {
            return Err(Error::BadParityCheck(format!("column {j} is empty")));
        }
        Ok(Self {
            n,
            k: n - sorted_rows.len(),
            rows: sorted_rows,
            cols,
        })
    }

    /// Codeword length N.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Information length K = N - (number of checks).
    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of check rows, N - K.
    pub fn checks(&self) -> usize {
        self.rows.len()
    }

    /// Column indices of one check row, sorted.
    pub fn row(&self, i: usize) -> &[u32] {
        &self.rows[i]
    }

    /// Check indices touching one column, sorted.
    pub fn col(&self, j: usize) -> &[u32] {
        &self.cols[j]
    }
}

/// GF(2) product `Hx`.
pub fn syndrome(x: &[u8], h: &ParityCheckMatrix) -> Result<Vec<u8>> {
    if x.len() != h.n {
        return Err(Error::LengthMismatch {
            context: "syndrome input",
            got: x.len(),
            expected: h.n,
        });
    }
    if let Some(&b) = x.iter().find(|&&b| b > 1) {
        return Err(Error::BadParityCheck(format!(
            "bit value {b} is not 0 or 1"
        )));
    }
    Ok(h.rows
        .iter()
        .map(|row| row.iter().fold(0u8, |acc, &j| acc ^ x[j as usize]))
        .collect())
}

fn parse_count(tok: Option<&str>, line: usize, what: &str) -> Result<usize> {
    let tok = tok.ok_or_else(|| Error::AlistParse {
        line,
        reason: format!("missing {what}"),
    })?;
    tok.parse::<usize>().map_err(|_| Error::AlistParse {
        line,
        reason: format!("{what} is not a non-negative integer: {tok:?}"),
    })
}

/// Parses the alist sparse-matrix text format: dimensions, max degrees,
/// per-column and per-row degree lists, then 1-indexed neighbor lists, one
/// line per column and then per row. Zero entries inside neighbor lines are
/// accepted as padding and skipped.
pub fn parse_alist(text: &str) -> Result<ParityCheckMatrix> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty());
    let mut next_line = |what: &str| {
        lines.next().ok_or_else(|| Error::AlistParse {
            line: text.lines().count() + 1,
            reason: format!("file ended before {what}"),
        })
    };

    let (lnum, dims) = next_line("the dimension line")?;
    let mut toks = dims.split_whitespace();
    let n = parse_count(toks.next(), lnum, "column count")?;
    let m = parse_count(toks.next(), lnum, "row count")?;
    if n == 0 || m == 0 {
        return Err(Error::AlistParse {
            line: lnum,
            reason: "dimensions must be positive".into(),
        });
    }

    let (lnum, maxdeg) = next_line("the max-degree line")?;
    let mut toks = maxdeg.split_whitespace();
    let max_col = parse_count(toks.next(), lnum, "max column degree")?;
    let max_row = parse_count(toks.next(), lnum, "max row degree")?;

    let parse_degrees = |line: &str, lnum: usize, count: usize, what: &str| -> Result<Vec<usize>> {
        let degs: Vec<usize> = line
            .split_whitespace()
            .map(|t| parse_count(Some(t), lnum, what))
            .collect::<Result<_>>()?;
        if degs.len() != count {
            return Err(Error::AlistParse {
                line: lnum,
                reason: format!("expected {count} {what}s, found {}", degs.len()),
            });
        }
        Ok(degs)
    };

    let (lnum, col_deg_line) = next_line("the column degree list")?;
    let col_degs = parse_degrees(col_deg_line, lnum, n, "column degree")?;
    if let Some(j) = col_degs.iter().position(|&d| d == 0) {
        return Err(Error::AlistParse {
            line: lnum,
            reason: format!("column {j} has degree 0"),
        });
    }
    if let Some(&d) = col_degs.iter().find(|&&d| d > max_col) {
        return Err(Error::AlistParse {
            line: lnum,
            reason: format!("column degree {d} exceeds declared maximum {max_col}"),
        });
    }

    let (lnum, row_deg_line) = next_line("the row degree list")?;
    let row_degs = parse_degrees(row_deg_line, lnum, m, "row degree")?;
    if let Some(i) = row_degs.iter().position(|&d| d == 0) {
        return Err(Error::AlistParse {
            line: lnum,
            reason: format!("row {i} has degree 0"),
        });
    }
    if let Some(&d) = row_degs.iter().find(|&&d| d > max_row) {
        return Err(Error::AlistParse {
            line: lnum,
            reason: format!("row degree {d} exceeds declared maximum {max_row}"),
        });
    }

    let parse_neighbors =
        |line: &str, lnum: usize, degree: usize, limit: usize, what: &str| -> Result<Vec<u32>> {
            let mut out = Vec::with_capacity(degree);
            for tok in line.split_whitespace() {
                let v = parse_count(Some(tok), lnum, what)?;
                if v == 0 {
                    continue;
                }
                if v > limit {
                    return Err(Error::AlistParse {
                        line: lnum,
                        reason: format!("{what} {v} out of range 1..={limit}"),
                    });
                }
                out.push((v - 1) as u32);
            }
            if out.len() != degree {
                return Err(Error::AlistParse {
                    line: lnum,
                    reason: format!("expected {degree} {what}s, found {}", out.len()),
                });
            }
            Ok(out)
        };

    let mut col_lists = Vec::with_capacity(n);
    for (j, &deg) in col_degs.iter().enumerate() {
        let (lnum, line) = next_line(&format!("the neighbor list of column {j}"))?;
        col_lists.push((lnum, parse_neighbors(line, lnum, deg, m, "row index")?));
    }
    let mut row_lists = Vec::with_capacity(m);
    for (i, &deg) in row_degs.iter().enumerate() {
        let (lnum, line) = next_line(&format!("the neighbor list of row {i}"))?;
        row_lists.push((lnum, parse_neighbors(line, lnum, deg, n, "column index")?));
    }

    // The two neighbor sections describe the same edge set; cross-check so
    // a corrupted file cannot parse into a half-consistent matrix.
    let mut edges_from_cols: Vec<(u32, u32)> = col_lists
        .iter()
        .enumerate()
        .flat_map(|(j, (_, rows))| rows.iter().map(move |&i| (i, j as u32)))
        .collect();
    edges_from_cols.sort_unstable();
    let mut edges_from_rows: Vec<(u32, u32)> = row_lists
        .iter()
        .enumerate()
        .flat_map(|(i, (_, cols))| cols.iter().map(move |&j| (i as u32, j)))
        .collect();
    edges_from_rows.sort_unstable();
    if edges_from_cols != edges_from_rows {
        let line = row_lists.first().map(|&(l, _)| l).unwrap_or(1);
        return Err(Error::AlistParse {
            line,
            reason: "column and row neighbor lists describe different matrices".into(),
        });
    }

    ParityCheckMatrix::new(n, row_lists.into_iter().map(|(_, r)| r).collect()).map_err(|e| {
        Error::AlistParse {
            line: 1,
            reason: e.to_string(),
        }
    })
}

/// Renders a matrix in the alist format accepted by [`parse_alist`].
pub fn write_alist(h: &ParityCheckMatrix) -> String {
    let mut out = String::new();
    let max_col = h.cols.iter().map(Vec::len).max().unwrap_or(0);
    let max_row = h.rows.iter().map(Vec::len).max().unwrap_or(0);
    let _ = writeln!(out, "{} {}", h.n, h.rows.len());
    let _ = writeln!(out, "{max_col} {max_row}");
    let degs: Vec<String> = h.cols.iter().map(|c| c.len().to_string()).collect();
    let _ = writeln!(out, "{}", degs.join(" "));
    let degs: Vec<String> = h.rows.iter().map(|r| r.len().to_string()).collect();
    let _ = writeln!(out, "{}", degs.join(" "));
    for c in &h.cols {
        let entries: Vec<String> = c.iter().map(|&i| (i + 1).to_string()).collect();
        let _ = writeln!(out, "{}", entries.join(" "));
    }
    for r in &h.rows {
        let entries: Vec<String> = r.iter().map(|&j| (j + 1).to_string()).collect();
        let _ = writeln!(out, "{}", entries.join(" "));
    }
    out
}

/// Reads a matrix from an alist file.
pub fn load_alist(path: &Path) -> Result<ParityCheckMatrix> {
    parse_alist(&std::fs::read_to_string(path)?)
}

/// Writes a matrix to an alist file.
pub fn save_alist(h: &ParityCheckMatrix, path: &Path) -> Result<()> {
    Ok(std::fs::write(path, write_alist(h))?)
}

/// Result of one syndrome-constrained decode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyndromeDecode {
    pub bits: Vec<u8>,
    pub converged: bool,
    pub iterations: u32,
}

fn hard_decision(posteriors: &[f64]) -> Vec<u8> {
    posteriors.iter().map(|&l| u8::from(l < 0.0)).collect()
}

/// Sum-product decoding constrained to the target syndrome `s`: finds a bit
/// vector with `Hx = s` favored by the LLRs (convention `log(P0/P1)`, so
/// positive means bit 0).
///
/// Check updates use the tanh rule with the check's sign flipped when its
/// syndrome bit is 1. Decoding stops as soon as the running hard decision
/// satisfies the syndrome; an input whose hard decision already satisfies
/// it comes back unchanged without any message passing. After `max_iter`
/// passes without convergence the last hard decision is returned with
/// `converged = false`.
pub fn decode_syndrome(
    llrs: &[f64],
    s: &[u8],
    h: &ParityCheckMatrix,
    max_iter: u32,
) -> Result<SyndromeDecode> {
    if llrs.len() != h.n {
        return Err(Error::LengthMismatch {
            context: "decoder llr input",
            got: llrs.len(),
            expected: h.n,
        });
    }
    if s.len() != h.rows.len() {
        return Err(Error::LengthMismatch {
            context: "decoder syndrome input",
            got: s.len(),
            expected: h.rows.len(),
        });
    }
    if llrs.iter().any(|l| !l.is_finite()) {
        return Err(Error::NonFinite("decoder llr input"));
    }
    if let Some(&b) = s.iter().find(|&&b| b > 1) {
        return Err(Error::BadParityCheck(format!(
            "syndrome value {b} is not 0 or 1"
        )));
    }

    let bits = hard_decision(llrs);
    if syndrome(&bits, h)? == s {
        return Ok(SyndromeDecode {
            bits,
            converged: true,
            iterations: 0,
        });
    }

    // Messages live on edges, indexed row-major per check.
    let offsets: Vec<usize> = h
        .rows
        .iter()
        .scan(0usize, |acc, r| {
            let start = *acc;
            *acc += r.len();
            Some(start)
        })
        .collect();
    let edge_count: usize = h.rows.iter().map(Vec::len).sum();
    let mut check_msg = vec![0.0f64; edge_count];
    let mut posteriors: Vec<f64> = llrs.to_vec();
    let mut bits = bits;

    for iteration in 1..=max_iter {
        for (i, row) in h.rows.iter().enumerate() {
            let base = offsets[i];
            let sign = if s[i] == 0 { 1.0 } else { -1.0 };
            // Exclusive products of tanh(q/2) via prefix/suffix scans; q is
            // the posterior minus this check's own previous message.
            let deg = row.len();
            let mut tanhs = vec![0.0f64; deg];
            for (e, &j) in row.iter().enumerate() {
                let q = posteriors[j as usize] - check_msg[base + e];
                tanhs[e] = (q / 2.0).tanh();
            }
            let mut suffix = vec![1.0f64; deg + 1];
            for e in (0..deg).rev() {
                suffix[e] = suffix[e + 1] * tanhs[e];
            }
            let mut prefix = 1.0f64;
            for (e, &j) in row.iter().enumerate() {
                let others = prefix * suffix[e + 1];
                let t = (sign * others).clamp(-1.0, 1.0);
                let msg = if t.abs() >= 1.0 {
                    t.signum() * LLR_CLAMP
                } else {
                    (2.0 * t.atanh()).clamp(-LLR_CLAMP, LLR_CLAMP)
                };
                let q = posteriors[j as usize] - check_msg[base + e];
                posteriors[j as usize] = q + msg;
                check_msg[base + e] = msg;
                prefix *= tanhs[e];
            }
        }
        bits = hard_decision(&posteriors);
        if syndrome(&bits, h)? == s {
            return Ok(SyndromeDecode {
                bits,
                converged: true,
                iterations: iteration,
            });
        }
    }
    Ok(SyndromeDecode {
        bits,
        converged: false,
        iterations: max_iter,
    })
}

/// Exhaustive maximum-likelihood syndrome decoder: scores every bit vector
/// with the target syndrome by its LLR correlation. Reference oracle for
/// small codes; rejects n > 20 outright.
pub fn ml_syndrome_decode(llrs: &[f64], s: &[u8], h: &ParityCheckMatrix) -> Result<Vec<u8>> {
    if llrs.len() != h.n {
        return Err(Error::LengthMismatch {
            context: "oracle llr input",
            got: llrs.len(),
            expected: h.n,
        });
    }
    if h.n > 20 {
        return Err(Error::BadParityCheck(format!(
            "exhaustive oracle limited to 20 columns, got {}",
            h.n
        )));
    }
    let mut best: Option<(f64, Vec<u8>)> = None;
    for word in 0u32..1 << h.n {
        let bits: Vec<u8> = (0..h.n).map(|j| ((word >> j) & 1) as u8).collect();
        if syndrome(&bits, h)? != s {
            continue;
        }
        // log P(llr | bits) up to a constant is the correlation of the
        // bipolar word with the LLRs.
        let score: f64 = bits
            .iter()
            .zip(llrs)
            .map(|(&b, &l)| if b == 0 { l } else { -l })
            .sum();
        if best.as_ref().is_none_or(|(s0, _)| score > *s0) {
            best = Some((score, bits));
        }
    }
    best.map(|(_, bits)| bits)
        .ok_or_else(|| Error::BadParityCheck("no vector matches the syndrome".into()))
}

/// Outcome of reconciling one key against node-1's bits.
#[derive(Debug, Clone)]
pub struct ReconcileOutcome {
    /// Corrected key, same length as the input (padding stripped).
    pub corrected: Vec<u8>,
    /// Mismatching bits before decoding, padding excluded.
    pub pre_mismatch: u64,
    /// Mismatching bits after decoding, padding excluded.
    pub post_mismatch: u64,
    /// Key bits compared (input length).
    pub bits_compared: u64,
    pub frames: u64,
    pub converged_frames: u64,
    /// Syndrome bits published: frames times (N - K).
    pub disclosed_bits: u64,
}

impl ReconcileOutcome {
    pub fn pre_rate(&self) -> f64 {
        self.pre_mismatch as f64 / self.bits_compared as f64
    }

    pub fn post_rate(&self) -> f64 {
        self.post_mismatch as f64 / self.bits_compared as f64
    }
}

/// Runs the full syndrome exchange over one key: node-1's bits are framed
/// into N-bit blocks, each block's syndrome is "broadcast", and the holder
/// of `node_llrs` decodes toward it. The final frame is zero-padded on
/// node-1's side and padded with `+LLR_CLAMP` (a confidently known zero
/// bit) on the decoding side; padded positions are excluded from the
/// mismatch statistics.
pub fn reconcile_block(
    node1_bits: &[u8],
    node_llrs: &[f64],
    h: &ParityCheckMatrix,
    max_iter: u32,
) -> Result<ReconcileOutcome> {
    if node1_bits.len() != node_llrs.len() {
        return Err(Error::SampleLengthMismatch(
            node1_bits.len(),
            node_llrs.len(),
        ));
    }
    if node1_bits.is_empty() {
        return Err(Error::Config("reconciliation needs a non-empty key".into()));
    }
    if let Some(&b) = node1_bits.iter().find(|&&b| b > 1) {
        return Err(Error::BadParityCheck(format!(
            "bit value {b} is not 0 or 1"
        )));
    }
    let n = h.n;
    let frames = node1_bits.len().div_ceil(n);
    let mut corrected = Vec::with_capacity(node1_bits.len());
    let mut pre_mismatch = 0u64;
    let mut post_mismatch = 0u64;
    let mut converged_frames = 0u64;
    for f in 0..frames {
        let lo = f * n;
        let hi = (lo + n).min(node1_bits.len());
        let mut x = vec![0u8; n];
        x[..hi - lo].copy_from_slice(&node1_bits[lo..hi]);
        let mut llrs = vec![LLR_CLAMP; n];
        llrs[..hi - lo].copy_from_slice(&node_llrs[lo..hi]);

        let s = syndrome(&x, h)?;
        let decode = decode_syndrome(&llrs, &s, h, max_iter)?;
        if decode.converged {
            converged_frames += 1;
        }
        for j in 0..hi - lo {
            pre_mismatch += u64::from((llrs[j] < 0.0) != (x[j] == 1));
            post_mismatch += u64::from(decode.bits[j] != x[j]);
        }
        corrected.extend_from_slice(&decode.bits[..hi - lo]);
    }
    Ok(ReconcileOutcome {
        corrected,
        pre_mismatch,
        post_mismatch,
        bits_compared: node1_bits.len() as u64,
        frames: frames as u64,
        converged_frames,
        disclosed_bits: frames as u64 * h.rows.len() as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn fixture_path(name: &str) -> std::path::PathBuf {
        std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("fixtures")
            .join(name)
    }

    fn small_code() -> ParityCheckMatrix {
        load_alist(&fixture_path("ldpc_12_9.alist")).unwrap()
    }

    /// Strong LLRs matching `x`, except listed positions carry a weak
    /// flipped belief.
    fn llrs_for(x: &[u8], weak_flipped: &[usize]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(j, &b)| {
                let strong: f64 = if b == 0 { 20.0 } else { -20.0 };
                if weak_flipped.contains(&j) {
                    -0.1 * strong.signum()
                } else {
                    strong
                }
            })
            .collect()
    }

    #[test]
    fn fixture_parses_to_the_expected_rows() {
        let h = small_code();
        assert_eq!(h.n(), 12);
        assert_eq!(h.k(), 9);
        assert_eq!(h.row(0), &[0, 1, 2, 3]);
        assert_eq!(h.row(1), &[3, 4, 5, 6, 7]);
        assert_eq!(h.row(2), &[7, 8, 9, 10, 11]);
        assert_eq!(h.col(3), &[0, 1]);
        assert_eq!(h.col(7), &[1, 2]);
    }

    #[test]
    fn writer_and_parser_round_trip() {
        let h = small_code();
        let text = write_alist(&h);
        assert_eq!(parse_alist(&text).unwrap(), h);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("code.alist");
        save_alist(&h, &path).unwrap();
        assert_eq!(load_alist(&path).unwrap(), h);
    }

    #[test]
    fn parser_reports_line_numbers_for_malformed_input() {
        // Column 2 declared with degree 0.
        let text = "3 1\n1 3\n1 0 1\n3\n1\n\n1\n1 2 3\n";
        match parse_alist(text) {
            Err(Error::AlistParse { line: 3, reason }) => {
                assert!(reason.contains("degree 0"), "{reason}");
            }
            other => panic!("expected a line-3 parse error, got {other:?}"),
        }
        // Neighbor lists disagree between the column and row sections.
        let text = "3 1\n1 3\n1 1 1\n3\n1\n1\n1\n1 2 2\n";
        match parse_alist(text) {
            Err(Error::AlistParse { reason, .. }) => {
                assert!(
                    reason.contains("different matrices") || reason.contains("duplicate"),
                    "{reason}"
                );
            }
            other => panic!("expected a consistency error, got {other:?}"),
        }
        // Out-of-range neighbor.
        let text = "3 1\n1 3\n1 1 1\n3\n1\n1\n2\n1 2 3\n";
        match parse_alist(text) {
            Err(Error::AlistParse { line, reason }) => {
                assert!(line >= 5, "line {line}: {reason}");
            }
            other => panic!("expected a parse error, got {other:?}"),
        }
        // Truncated file.
        assert!(matches!(
            parse_alist("3 1\n"),
            Err(Error::AlistParse { .. })
        ));
    }

    #[test]
    fn padded_neighbor_entries_are_accepted() {
        let text = "3 1\n1 3\n1 1 1\n3\n1 0\n1 0\n1 0\n1 2 3 0 0\n";
        let h = parse_alist(text).unwrap();
        assert_eq!(h.row(0), &[0, 1, 2]);
    }

    #[test]
    fn syndrome_is_linear_and_matches_columns() {
        let h = small_code();
        assert_eq!(syndrome(&[0; 12], &h).unwrap(), vec![0; 3]);
        for j in 0..12 {
            let mut e = vec![0u8; 12];
            e[j] = 1;
            let s = syndrome(&e, &h).unwrap();
            let expected: Vec<u8> = (0..3)
                .map(|i| u8::from(h.row(i).contains(&(j as u32))))
                .collect();
            assert_eq!(s, expected, "column {j}");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let x: Vec<u8> = (0..12).map(|_| rng.random_range(0..2u8)).collect();
            let y: Vec<u8> = (0..12).map(|_| rng.random_range(0..2u8)).collect();
            let xy: Vec<u8> = x.iter().zip(&y).map(|(a, b)| a ^ b).collect();
            let sx = syndrome(&x, &h).unwrap();
            let sy = syndrome(&y, &h).unwrap();
            let sxy = syndrome(&xy, &h).unwrap();
            let expect: Vec<u8> = sx.iter().zip(&sy).map(|(a, b)| a ^ b).collect();
            assert_eq!(sxy, expect);
        }
    }

    #[test]
    fn satisfied_hard_input_returns_unchanged() {
        let h = small_code();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let x: Vec<u8> = (0..12).map(|_| rng.random_range(0..2u8)).collect();
            let llrs = llrs_for(&x, &[]);
            let s = syndrome(&x, &h).unwrap();
            let out = decode_syndrome(&llrs, &s, &h, 50).unwrap();
            assert_eq!(out.bits, x);
            assert!(out.converged);
            assert!(out.iterations <= 1);
        }
    }

    #[test]
    fn weak_flipped_bit_is_corrected_at_every_position() {
        let h = small_code();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for j in 0..12 {
            let x: Vec<u8> = (0..12).map(|_| rng.random_range(0..2u8)).collect();
            let llrs = llrs_for(&x, &[j]);
            let s = syndrome(&x, &h).unwrap();
            let out = decode_syndrome(&llrs, &s, &h, 50).unwrap();
            assert_eq!(out.bits, x, "flipped position {j}");
            assert!(out.converged);
        }
    }

    #[test]
    fn converged_decodes_satisfy_the_syndrome() {
        let h = small_code();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let noise = Normal::new(0.0, 4.0).unwrap();
        let mut converged = 0u32;
        for _ in 0..10_000 {
            let llrs: Vec<f64> = (0..12).map(|_| noise.sample(&mut rng)).collect();
            let s: Vec<u8> = (0..3).map(|_| rng.random_range(0..2u8)).collect();
            let out = decode_syndrome(&llrs, &s, &h, 50).unwrap();
            if out.converged {
                converged += 1;
                assert_eq!(syndrome(&out.bits, &h).unwrap(), s);
            }
        }
        assert!(
            converged > 5_000,
            "decoder should usually converge, got {converged}"
        );
    }

    /// Sum-product against the exhaustive maximum-likelihood oracle on
    /// noisy instances with roughly 10% input bit errors.
    #[test]
    fn agrees_with_the_exhaustive_oracle() {
        let h = small_code();
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        // Consistent AWGN LLR amplitudes N(mu, sqrt(2 mu)) at two percent
        // input bit errors, the regime bracketing the pipeline's residual
        // mismatch after quantization. Sum-product computes bitwise
        // posteriors, so whole-word agreement with the blockwise ML oracle
        // degrades as the amplitudes get mushier; two percent leaves a wide
        // margin over the 0.99 bar.
        let amp = Normal::new(8.4357, 4.1075).unwrap();
        let trials = 10_000;
        let mut agree = 0u32;
        let mut pre_errors = 0u64;
        for _ in 0..trials {
            let x: Vec<u8> = (0..12).map(|_| rng.random_range(0..2u8)).collect();
            let s = syndrome(&x, &h).unwrap();
            let llrs: Vec<f64> = x
                .iter()
                .map(|&b| {
                    let a = amp.sample(&mut rng);
                    if b == 0 {
                        a
                    } else {
                        -a
                    }
                })
                .collect();
            pre_errors += llrs
                .iter()
                .zip(&x)
                .filter(|(&l, &b)| (l < 0.0) != (b == 1))
                .count() as u64;
            let sp = decode_syndrome(&llrs, &s, &h, 50).unwrap();
            let ml = ml_syndrome_decode(&llrs, &s, &h).unwrap();
            if sp.bits == ml {
                agree += 1;
            }
        }
        let ber = pre_errors as f64 / (trials as f64 * 12.0);
        assert!((0.01..=0.04).contains(&ber), "input BER drifted to {ber}");
        let rate = f64::from(agree) / f64::from(trials);
        assert!(
            rate >= 0.99,
            "sum-product matched ML on only {rate} of trials"
        );
    }

    #[test]
    fn reconcile_pads_and_accounts_correctly() {
        let h = small_code();
        let bits: Vec<u8> = (0..20).map(|j| (j % 3 == 0) as u8).collect();
        let llrs: Vec<f64> = bits
            .iter()
            .map(|&b| if b == 0 { 15.0 } else { -15.0 })
            .collect();
        let out = reconcile_block(&bits, &llrs, &h, 50).unwrap();
        assert_eq!(out.corrected, bits);
        assert_eq!(out.pre_mismatch, 0);
        assert_eq!(out.post_mismatch, 0);
        assert_eq!(out.bits_compared, 20);
        assert_eq!(out.frames, 2);
        assert_eq!(out.converged_frames, 2);
        assert_eq!(out.disclosed_bits, 6);
        assert_eq!(out.pre_rate(), 0.0);
    }

    #[test]
    fn reconcile_improves_noisy_keys_frame_by_frame() {
        let h = small_code();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        // Consistent AWGN LLR amplitudes at three percent input bit errors.
        let amp = Normal::new(7.0748, 3.7616).unwrap();
        let mut improved_or_equal = 0u32;
        let mut pre_total = 0u64;
        let mut post_total = 0u64;
        let frames = 400;
        for _ in 0..frames {
            let x: Vec<u8> = (0..12).map(|_| rng.random_range(0..2u8)).collect();
            let llrs: Vec<f64> = x
                .iter()
                .map(|&b| {
                    let a = amp.sample(&mut rng);
                    if b == 0 {
                        a
                    } else {
                        -a
                    }
                })
                .collect();
            let out = reconcile_block(&x, &llrs, &h, 50).unwrap();
            pre_total += out.pre_mismatch;
            post_total += out.post_mismatch;
            if out.post_mismatch <= out.pre_mismatch {
                improved_or_equal += 1;
            }
        }
        assert!(
            pre_total > 0,
            "the noise level should produce some mismatches"
        );
        assert!(post_total < pre_total, "{post_total} vs {pre_total}");
        let frac = f64::from(improved_or_equal) / f64::from(frames);
        assert!(frac >= 0.95, "post <= pre on only {frac} of frames");
    }

    #[test]
    fn large_fixture_is_a_valid_regular_code() {
        let h = load_alist(&fixture_path("ldpc_648_486.alist")).unwrap();
        assert_eq!(h.n(), 648);
        assert_eq!(h.k(), 486);
        assert_eq!(h.checks(), 162);
        assert!((0..648).all(|j| h.col(j).len() == 3));
        assert!((0..162).all(|i| h.row(i).len() == 12));

        // A handful of weak flipped bits decode back to the key.
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let x: Vec<u8> = (0..648).map(|_| rng.random_range(0..2u8)).collect();
        let weak: Vec<usize> = (0..5).map(|_| rng.random_range(0..648)).collect();
        let llrs = llrs_for(&x, &weak);
        let s = syndrome(&x, &h).unwrap();
        let out = decode_syndrome(&llrs, &s, &h, 50).unwrap();
        assert!(out.converged);
        assert_eq!(out.bits, x);
    }

    #[test]
    fn decoder_validates_inputs() {
        let h = small_code();
        assert!(matches!(
            decode_syndrome(&[0.0; 5], &[0; 3], &h, 50),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            decode_syndrome(&[0.0; 12], &[0; 2], &h, 50),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            syndrome(&[0; 5], &h),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            reconcile_block(&[0, 1, 2], &[1.0, 1.0, 1.0], &h, 50),
            Err(Error::BadParityCheck(_))
        ));
        assert!(matches!(
            ParityCheckMatrix::new(4, vec![vec![0, 1], vec![2]]),
            Err(Error::BadParityCheck(_))
        ));
        assert!(matches!(
            ParityCheckMatrix::new(4, vec![vec![0, 1], vec![1, 0]]),
            Err(Error::BadParityCheck(_))
        ));
    }
}
