//! Distance kernels between equal-length daily sub-patterns.
//!
//! Both warping kernels run the full `m x m` dynamic program with the
//! boundary `cost(0,0) = 0` and `+inf` along the rest of row 0 and column 0,
//! and return the square root of the cumulative cost at `(m, m)`. No
//! warping-window constraint is applied.

use crate::error::{Error, Result};
use crate::mask::WeightMatrix;

fn check_lengths(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::usage(format!(
            "sub-pattern lengths differ: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    Ok(())
}

pub fn euclidean(x: &[f64], y: &[f64]) -> Result<f64> {
    check_lengths(x, y)?;
    Ok(x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

/// Classic DTW with squared pointwise cost.
pub fn dtw(x: &[f64], y: &[f64]) -> Result<f64> {
    check_lengths(x, y)?;
    if x.is_empty() {
        return Err(Error::usage("DTW needs non-empty sub-patterns"));
    }
    Ok(warp(x, y, |_, _| 1.0, &mut NoProbe).sqrt())
}

/// Refined DTW: every cell cost `(x_i - y_j)^2` is scaled by `W[i][j]`.
pub fn r_dtw(x: &[f64], y: &[f64], w: &WeightMatrix) -> Result<f64> {
    check_r_dtw(x, y, w)?;
    Ok(warp_weighted(x, y, w, &mut NoProbe).sqrt())
}

/// [`r_dtw`] that also reports how many DP cells were evaluated.
pub fn r_dtw_counted(x: &[f64], y: &[f64], w: &WeightMatrix) -> Result<(f64, u64)> {
    check_r_dtw(x, y, w)?;
    let mut probe = CellCounter(0);
    let d = warp_weighted(x, y, w, &mut probe).sqrt();
    Ok((d, probe.0))
}

fn check_r_dtw(x: &[f64], y: &[f64], w: &WeightMatrix) -> Result<()> {
    check_lengths(x, y)?;
    if x.len() != w.dim() || x.is_empty() {
        return Err(Error::usage(format!(
            "sub-pattern length {} does not match weight matrix dimension {}",
            x.len(),
            w.dim()
        )));
    }
    Ok(())
}

trait Probe {
    fn visit(&mut self);
}

struct NoProbe;

impl Probe for NoProbe {
    #[inline(always)]
    fn visit(&mut self) {}
}

struct CellCounter(u64);

impl Probe for CellCounter {
    #[inline(always)]
    fn visit(&mut self) {
        self.0 += 1;
    }
}

#[inline]
fn warp<F, P>(x: &[f64], y: &[f64], weight: F, probe: &mut P) -> f64
where
    F: Fn(usize, usize) -> f64,
    P: Probe,
{
    let m = y.len();
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut cur = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for (i, &xi) in x.iter().enumerate() {
        cur[0] = f64::INFINITY;
        for j in 1..=m {
            probe.visit();
            let d = xi - y[j - 1];
            let best = prev[j - 1].min(prev[j]).min(cur[j - 1]);
            cur[j] = weight(i, j - 1) * (d * d) + best;
        }
        std::mem::swap(&mut prev, &mut cur);
        prev[0] = f64::INFINITY;
    }
    prev[m]
}

/// Same recurrence as [`warp`] with the weight row hoisted out of the inner
/// loop; this is the hot path of motif discovery.
#[inline]
fn warp_weighted<P: Probe>(x: &[f64], y: &[f64], w: &WeightMatrix, probe: &mut P) -> f64 {
    let m = y.len();
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut cur = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for (i, &xi) in x.iter().enumerate() {
        let wrow = w.row(i);
        cur[0] = f64::INFINITY;
        let mut left = f64::INFINITY;
        for j in 0..m {
            probe.visit();
            let d = xi - y[j];
            let best = prev[j].min(prev[j + 1]).min(left);
            left = wrow[j] * (d * d) + best;
            cur[j + 1] = left;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[m]
}

/// Zero-mean, unit population-variance copy of `x`; near-constant inputs
/// (std below 1e-12) map to all zeros.
pub fn z_normalize(x: &[f64]) -> Vec<f64> {
    if x.is_empty() {
        return Vec::new();
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if std < 1e-12 {
        return vec![0.0; x.len()];
    }
    x.iter().map(|v| (v - mean) / std).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::MaskSpec;
    use proptest::prelude::*;

    /// Minimum weighted cost over every monotone warping path from (0,0) to
    /// (m-1,m-1), by exhaustive recursion.
    fn brute_force_warp(x: &[f64], y: &[f64], w: &WeightMatrix) -> f64 {
        fn go(i: usize, j: usize, x: &[f64], y: &[f64], w: &WeightMatrix) -> f64 {
            let c = w.get(i, j) * (x[i] - y[j]).powi(2);
            if i == 0 && j == 0 {
                return c;
            }
            let mut best = f64::INFINITY;
            if i > 0 && j > 0 {
                best = best.min(go(i - 1, j - 1, x, y, w));
            }
            if i > 0 {
                best = best.min(go(i - 1, j, x, y, w));
            }
            if j > 0 {
                best = best.min(go(i, j - 1, x, y, w));
            }
            c + best
        }
        go(x.len() - 1, y.len() - 1, x, y, w).sqrt()
    }

    #[test]
    fn euclidean_examples() {
        assert_eq!(euclidean(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 5.0);
        assert_eq!(euclidean(&[1.5, 2.0], &[1.5, 2.0]).unwrap(), 0.0);
        let d = euclidean(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap();
        assert!((d - 14f64.sqrt()).abs() < 1e-15);
        assert!(euclidean(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn dtw_examples() {
        let x = [0.3, 1.2, 0.0, 4.0];
        assert_eq!(dtw(&x, &x).unwrap(), 0.0);
        let (a, b) = ([0.0, 0.0, 1.0], [0.0, 1.0, 1.0]);
        assert_eq!(brute_force_warp(&a, &b, &WeightMatrix::ones(3)), 0.0);
        assert_eq!(dtw(&a, &b).unwrap(), 0.0);
        assert_eq!(euclidean(&a, &b).unwrap(), 1.0);
        assert_eq!(dtw(&[0.0], &[3.0]).unwrap(), 3.0);
        assert!(dtw(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn r_dtw_examples() {
        let x = [0.5, 2.0, 1.0, 7.0];
        let y = [1.0, 0.0, 3.0, 2.0];
        assert_eq!(r_dtw(&x, &y, &WeightMatrix::ones(4)).unwrap(), dtw(&x, &y).unwrap());
        assert_eq!(r_dtw(&x, &y, &WeightMatrix::zeros(4)).unwrap(), 0.0);

        // w = [0, 1] so W = [[0, 1], [1, 1]]; the DP table is
        // [[0, 16], [1, 0]] and the end cell is 0.
        let w = WeightMatrix::from_mask(&MaskSpec::new(1, 2, 2).unwrap());
        assert_eq!(w.entries(), &[0.0, 1.0, 1.0, 1.0]);
        assert_eq!(r_dtw(&[5.0, 1.0], &[0.0, 1.0], &w).unwrap(), 0.0);
        assert_eq!(brute_force_warp(&[5.0, 1.0], &[0.0, 1.0], &w), 0.0);

        assert!(r_dtw(&x, &y, &WeightMatrix::ones(3)).is_err());
    }

    #[test]
    fn z_normalize_examples() {
        assert_eq!(z_normalize(&[1.0; 4]), vec![0.0; 4]);
        assert_eq!(z_normalize(&[0.0, 2.0]), vec![-1.0, 1.0]);
    }

    #[test]
    fn kernel_visits_every_cell() {
        for m in [1usize, 2, 7, 48] {
            let x: Vec<f64> = (0..m).map(|i| i as f64).collect();
            let (_, cells) = r_dtw_counted(&x, &x, &WeightMatrix::ones(m)).unwrap();
            assert_eq!(cells, (m * m) as u64);
        }
    }

    fn pair(max_len: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1..max_len).prop_flat_map(|m| {
            (
                prop::collection::vec(-5.0f64..5.0, m),
                prop::collection::vec(-5.0f64..5.0, m),
            )
        })
    }

    proptest! {
        #[test]
        fn dp_matches_path_enumeration((x, y) in pair(7), ws in prop::collection::vec(0.0f64..1.0, 7)) {
            let w = WeightMatrix::from_weights(&ws[..x.len()]).unwrap();
            let dp = r_dtw(&x, &y, &w).unwrap();
            let bf = brute_force_warp(&x, &y, &w);
            prop_assert!((dp - bf).abs() <= 1e-12 * (1.0 + bf));
        }

        #[test]
        fn symmetric_and_bounded_by_euclidean((x, y) in pair(30)) {
            let d = dtw(&x, &y).unwrap();
            prop_assert_eq!(d, dtw(&y, &x).unwrap());
            prop_assert!(d <= euclidean(&x, &y).unwrap() + 1e-12);
            let m = x.len();
            let mask = MaskSpec::new(m / 3, m, m).unwrap();
            let w = WeightMatrix::from_mask(&mask);
            prop_assert_eq!(r_dtw(&x, &y, &w).unwrap(), r_dtw(&y, &x, &w).unwrap());
        }

        #[test]
        fn monotone_in_weights((x, y) in pair(20), lo in prop::collection::vec(0.0f64..1.0, 20), bump in prop::collection::vec(0.0f64..1.0, 20)) {
            let m = x.len();
            let w_lo = WeightMatrix::from_weights(&lo[..m]).unwrap();
            let hi: Vec<f64> = lo[..m].iter().zip(&bump).map(|(a, b)| (a + b).min(1.0)).collect();
            let w_hi = WeightMatrix::from_weights(&hi).unwrap();
            prop_assert!(r_dtw(&x, &y, &w_lo).unwrap() <= r_dtw(&x, &y, &w_hi).unwrap());
        }

        #[test]
        fn z_normalized_mean_is_zero(x in prop::collection::vec(-100.0f64..100.0, 2..60)) {
            let z = z_normalize(&x);
            let mean = z.iter().sum::<f64>() / z.len() as f64;
            prop_assert!(mean.abs() < 1e-9);
        }
    }
}
