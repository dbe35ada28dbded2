//! Hybrid correlation operators between a live window and an archived one.
//!
//! Each operator runs in one of two modes: `Mws` reads the archived
//! window's moments from its stored signature, `Direct` recomputes them
//! from the raw block. Both modes agree to 1e-9; the population variance
//! in the signature makes the agreement an algebraic identity rather than
//! an approximation.

use super::signature::{compute_mws, MwsSignature};
use crate::fmath;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatsMode {
    Mws,
    Direct,
}

/// Why a correlation produced no value. Undefined outcomes exclude the
/// pair from the result set and are counted, never silently mapped to 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Undefined {
    ZeroVariance,
    ZeroNorm,
    LengthMismatch,
    TooShort,
}

impl core::fmt::Display for Undefined {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let s = match self {
            Undefined::ZeroVariance => "zero variance",
            Undefined::ZeroNorm => "zero norm",
            Undefined::LengthMismatch => "length mismatch",
            Undefined::TooShort => "fewer than two aligned samples",
        };
        f.write_str(s)
    }
}

/// Pearson correlation between the live series and an archived window,
/// aligned by ordinal position. `(Σxᵢyᵢ/n − μx·μy)/(σx·σy)` with
/// population standard deviations.
pub fn pearson(
    live: &[f64],
    archived_raw: &[f64],
    archived_sig: &MwsSignature,
    mode: StatsMode,
) -> Result<f64, Undefined> {
    if live.len() != archived_raw.len() {
        return Err(Undefined::LengthMismatch);
    }
    if live.len() < 2 {
        return Err(Undefined::TooShort);
    }
    let x = compute_mws(live).expect("nonempty");
    let (mean_y, std_y) = match mode {
        StatsMode::Mws => (archived_sig.mean, archived_sig.std_dev()),
        StatsMode::Direct => {
            let y = compute_mws(archived_raw).expect("nonempty");
            (y.mean, y.std_dev())
        }
    };
    let std_x = x.std_dev();
    if std_x == 0.0 || std_y == 0.0 {
        return Err(Undefined::ZeroVariance);
    }
    let n = live.len() as f64;
    let mut cross = 0.0;
    for (a, b) in live.iter().zip(archived_raw.iter()) {
        cross += a * b;
    }
    Ok((cross / n - x.mean * mean_y) / (std_x * std_y))
}

/// Cosine similarity `Σxᵢyᵢ / (‖x‖·‖y‖)`; the archived norm comes from the
/// signature in `Mws` mode.
pub fn cosine(
    live: &[f64],
    archived_raw: &[f64],
    archived_sig: &MwsSignature,
    mode: StatsMode,
) -> Result<f64, Undefined> {
    if live.len() != archived_raw.len() {
        return Err(Undefined::LengthMismatch);
    }
    if live.is_empty() {
        return Err(Undefined::TooShort);
    }
    let norm_x = fmath::sqrt(live.iter().map(|v| v * v).sum());
    let norm_y = match mode {
        StatsMode::Mws => archived_sig.norm,
        StatsMode::Direct => fmath::sqrt(archived_raw.iter().map(|v| v * v).sum()),
    };
    if norm_x == 0.0 || norm_y == 0.0 {
        return Err(Undefined::ZeroNorm);
    }
    let mut cross = 0.0;
    for (a, b) in live.iter().zip(archived_raw.iter()) {
        cross += a * b;
    }
    Ok(cross / (norm_x * norm_y))
}

/// `|avg(live) − avg(archived)| < threshold`, computed from signatures
/// alone, with no raw access beyond the live window itself.
pub fn avg_similar(live: &MwsSignature, archived: &MwsSignature, threshold: f64) -> bool {
    fmath::abs(live.mean - archived.mean) < threshold
}

/// `|min(live) − min(archived)| < threshold`, signature-only.
pub fn min_similar(live: &MwsSignature, archived: &MwsSignature, threshold: f64) -> bool {
    fmath::abs(live.min - archived.min) < threshold
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig(values: &[f64]) -> MwsSignature {
        compute_mws(values).unwrap()
    }

    #[test]
    fn perfect_and_inverse_correlation() {
        let up = [1.0, 2.0, 3.0];
        let down = [3.0, 2.0, 1.0];
        for mode in [StatsMode::Mws, StatsMode::Direct] {
            let r = pearson(&up, &up, &sig(&up), mode).unwrap();
            assert!((r - 1.0).abs() < 1e-12);
            let r = pearson(&up, &down, &sig(&down), mode).unwrap();
            assert!((r + 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn modes_agree_to_1e9_on_random_windows() {
        let mut state = 42u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 40.0 + 10.0
        };
        for _ in 0..200 {
            let x: alloc::vec::Vec<f64> = (0..60).map(|_| next()).collect();
            let y: alloc::vec::Vec<f64> = (0..60).map(|_| next()).collect();
            let s = sig(&y);
            let a = pearson(&x, &y, &s, StatsMode::Mws).unwrap();
            let b = pearson(&x, &y, &s, StatsMode::Direct).unwrap();
            assert!((a - b).abs() <= 1e-9, "pearson modes diverged: {a} vs {b}");
            let a = cosine(&x, &y, &s, StatsMode::Mws).unwrap();
            let b = cosine(&x, &y, &s, StatsMode::Direct).unwrap();
            assert!((a - b).abs() <= 1e-9, "cosine modes diverged: {a} vs {b}");
        }
    }

    #[test]
    fn zero_variance_is_undefined_not_zero() {
        let flat = [2.0, 2.0, 2.0];
        let x = [1.0, 2.0, 3.0];
        assert_eq!(
            pearson(&x, &flat, &sig(&flat), StatsMode::Mws),
            Err(Undefined::ZeroVariance)
        );
        assert_eq!(
            pearson(&flat, &x, &sig(&x), StatsMode::Direct),
            Err(Undefined::ZeroVariance)
        );
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let x = [1.0, 2.0, 3.0];
        let y = [1.0, 2.0];
        assert_eq!(pearson(&x, &y, &sig(&y), StatsMode::Mws), Err(Undefined::LengthMismatch));
        assert_eq!(cosine(&x, &y, &sig(&y), StatsMode::Mws), Err(Undefined::LengthMismatch));
    }

    #[test]
    fn cosine_of_a_window_with_itself_is_one() {
        let x = [0.5, 1.5, -2.0, 4.0];
        let r = cosine(&x, &x, &sig(&x), StatsMode::Mws).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
        let zero = [0.0, 0.0];
        assert_eq!(cosine(&zero, &x[..2], &sig(&x[..2]), StatsMode::Direct), Err(Undefined::ZeroNorm));
    }

    #[test]
    fn avg_and_min_similarity_from_signatures() {
        let live = sig(&[0.0, 10.0]);
        let archived = sig(&[25.0, 25.0]);
        // |5 - 25| = 20, not within 10.
        assert!(!avg_similar(&live, &archived, 10.0));
        assert!(avg_similar(&live, &live, 10.0));
        assert!(!min_similar(&live, &archived, 10.0));
        assert!(min_similar(&live, &live, 10.0));
    }
}
