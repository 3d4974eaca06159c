use super::BoxConstraints;
use crate::error::{CfeError, Result};

/// Finite-difference gradient.
///
/// Central differences with per-coordinate step `h_i = rel_step * max(1, |w_i|)`;
/// one-sided when a central probe would leave the box. Coordinates pinned by
/// `lower == upper` get a zero derivative.
pub fn fd_gradient<F>(f: F, w: &[f64], bounds: &BoxConstraints, rel_step: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    let mut probe = w.to_vec();
    let eval = |probe: &[f64]| -> Result<f64> {
        let v = f(probe);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(CfeError::NonFinite(probe.to_vec()))
        }
    };
    let mut center: Option<f64> = None;
    let mut grad = vec![0.0; w.len()];
    for i in 0..w.len() {
        let (lo, hi) = (bounds.lower[i], bounds.upper[i]);
        let h = rel_step * w[i].abs().max(1.0);
        let up_room = hi - w[i];
        let down_room = w[i] - lo;
        let x = w[i];
        if up_room >= h && down_room >= h {
            probe[i] = x + h;
            let fp = eval(&probe)?;
            probe[i] = x - h;
            let fm = eval(&probe)?;
            grad[i] = (fp - fm) / (2.0 * h);
        } else {
            // one-sided toward the roomier side, shrinking the step if the box is narrow
            let (dir, step) = if up_room >= h {
                (1.0, h)
            } else if down_room >= h {
                (-1.0, h)
            } else if up_room >= down_room {
                (1.0, up_room)
            } else {
                (-1.0, down_room)
            };
            if step <= 0.0 {
                probe[i] = x;
                continue;
            }
            let f0 = match center {
                Some(v) => v,
                None => {
                    let v = eval(w)?;
                    center = Some(v);
                    v
                }
            };
            probe[i] = x + dir * step;
            let fs = eval(&probe)?;
            grad[i] = dir * (fs - f0) / step;
        }
        probe[i] = x;
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_gradient() {
        let f = |w: &[f64]| w.iter().map(|x| x * x).sum::<f64>();
        let g = fd_gradient(f, &[1.0, 2.0], &BoxConstraints::unbounded(2), 1e-4).unwrap();
        assert!((g[0] - 2.0).abs() < 1e-6 && (g[1] - 4.0).abs() < 1e-6);
    }

    #[test]
    fn linear_gradient_is_exact() {
        let c = [3.0, -1.5, 0.25];
        let f = |w: &[f64]| w.iter().zip(&c).map(|(x, c)| x * c).sum::<f64>();
        let g = fd_gradient(f, &[0.3, 0.0, 1.0], &BoxConstraints::new(vec![0.0; 3], vec![1.0; 3]), 1e-4).unwrap();
        for (gi, ci) in g.iter().zip(&c) {
            assert!((gi - ci).abs() < 1e-9, "{gi} vs {ci}");
        }
    }

    #[test]
    fn slope_away_from_kink() {
        let f = |w: &[f64]| w[0].min(1.0);
        let g = fd_gradient(f, &[0.5], &BoxConstraints::unbounded(1), 1e-4).unwrap();
        assert!((g[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn one_sided_at_bounds() {
        let f = |w: &[f64]| w[0] * w[0];
        let b = BoxConstraints::new(vec![0.0], vec![1.0]);
        let at_upper = fd_gradient(f, &[1.0], &b, 1e-4).unwrap();
        assert!((at_upper[0] - 2.0).abs() < 1e-3);
        let at_lower = fd_gradient(f, &[0.0], &b, 1e-4).unwrap();
        assert!(at_lower[0].abs() < 1e-3);
        let pinned = fd_gradient(f, &[0.5], &BoxConstraints::new(vec![0.5], vec![0.5]), 1e-4).unwrap();
        assert_eq!(pinned[0], 0.0);
    }

    #[test]
    fn non_finite_probe_is_an_error() {
        let f = |w: &[f64]| if w[0] > 1.0 { f64::NAN } else { w[0] };
        assert!(fd_gradient(f, &[1.0], &BoxConstraints::unbounded(1), 1e-4).is_err());
    }
}
