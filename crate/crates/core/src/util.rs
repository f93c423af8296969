//! Small numeric helpers shared across modules.

/// Neumaier-compensated sum. The result depends only on the input order.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Shannon entropy in bits of a list of nonnegative masses, normalised by their total.
///
/// Uses `log2(M) - (1/M) Σ m log2 m`, which keeps all terms positive-sized
/// when the total is far from 1.
pub fn entropy_of_masses(masses: &[f64]) -> f64 {
    let total = compensated_sum(masses.iter().copied());
    if total <= 0.0 {
        return 0.0;
    }
    let s = compensated_sum(
        masses
            .iter()
            .filter(|&&m| m > 0.0)
            .map(|&m| m * m.log2()),
    );
    let h = total.log2() - s / total;
    if h < 0.0 {
        0.0
    } else {
        h
    }
}

/// Rounds `t` to the nearest integer when it lies within `tol` of it, then floors.
pub fn snapped_floor(t: f64, tol: f64) -> i64 {
    let r = t.round();
    if (t - r).abs() <= tol * t.abs().max(1.0) {
        r as i64
    } else {
        t.floor() as i64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let v = [1.0, 1e-16, 1e-16, -1.0];
        assert_eq!(compensated_sum(v), 2e-16);
    }

    #[test]
    fn entropy_of_uniform_masses() {
        assert!((entropy_of_masses(&[0.25; 4]) - 2.0).abs() < 1e-15);
        assert!((entropy_of_masses(&[3.0, 3.0]) - 1.0).abs() < 1e-15);
        assert_eq!(entropy_of_masses(&[1.0]), 0.0);
    }

    #[test]
    fn snapped_floor_handles_near_integers() {
        assert_eq!(snapped_floor(1.9999999999999998, 1e-12), 2);
        assert_eq!(snapped_floor(1.5, 1e-12), 1);
        assert_eq!(snapped_floor(-0.1, 1e-12), -1);
    }
}
