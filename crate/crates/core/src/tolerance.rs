//! Process-wide numeric tolerances.
//!
//! Two base tolerances are used throughout the crate: one for matrix
//! properties (PSD membership, POVM completeness) and a tighter one for
//! scalar identities. Both are multiplied by a single global scale factor
//! that can be adjusted at runtime.

use std::sync::atomic::{AtomicU64, Ordering};

/// Base tolerance for PSD and completeness checks.
pub const MATRIX_TOL: f64 = 1e-10;
/// Base tolerance for scalar identities (norms, overlaps).
pub const SCALAR_TOL: f64 = 1e-12;

static SCALE_BITS: AtomicU64 = AtomicU64::new(0x3FF0_0000_0000_0000); // 1.0

/// Current global tolerance scale (defaults to 1).
pub fn scale() -> f64 {
    f64::from_bits(SCALE_BITS.load(Ordering::Relaxed))
}

/// Set the global tolerance scale. Non-positive or non-finite values are ignored.
pub fn set_scale(s: f64) {
    if s.is_finite() && s > 0.0 {
        SCALE_BITS.store(s.to_bits(), Ordering::Relaxed);
    }
}

/// Tolerance for matrix-valued checks at the current scale.
pub fn matrix() -> f64 {
    MATRIX_TOL * scale()
}

/// Tolerance for scalar identities at the current scale.
pub fn scalar() -> f64 {
    SCALAR_TOL * scale()
}
