//! Fitts' law: Shannon index of difficulty and index of performance.

use super::MetricsError;

/// `log2(distance / width + 1)` in bits. `width` is the target diameter and
/// `distance` is centre to centre.
pub fn index_of_difficulty(distance: f64, width: f64) -> Result<f64, MetricsError> {
    if !(width > 0.0) {
        return Err(MetricsError::NonPositiveWidth(width));
    }
    if !(distance >= 0.0) {
        return Err(MetricsError::NegativeDistance(distance));
    }
    // (D + W) / W rather than D / W + 1: exact for the common decimal cases.
    Ok(((distance + width) / width).log2())
}

/// Bits per second.
pub fn index_of_performance(id_bits: f64, movement_time: f64) -> Result<f64, MetricsError> {
    if !(movement_time > 0.0) {
        return Err(MetricsError::NonPositiveMt(movement_time));
    }
    Ok(id_bits / movement_time)
}
