//! Vector register hygiene after dense linear algebra.

/// Issues `vzeroupper` on every rayon worker and on the calling thread.
/// The x86 matrix kernels behind faer return with the upper vector lanes
/// dirty, after which plain SSE code on those threads runs many times
/// slower.
pub(crate) fn clear_upper_state() {
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx") {
        rayon::broadcast(|_| zero_upper());
        zero_upper();
    }
}

#[cfg(target_arch = "x86_64")]
fn zero_upper() {
    // SAFETY: only reached after AVX support was detected.
    unsafe { std::arch::x86_64::_mm256_zeroupper() }
}
