//! Decibel conversions.
//!
//! Transmit powers are quoted as `P_dB = 10 log10(P / sigma^2)`, so the
//! x-axis of every curve is the transmit SNR.

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Linear transmit power for a power quoted in dB relative to `sigma2`.
pub fn power_from_db(p_db: f64, sigma2: f64) -> f64 {
    sigma2 * db_to_linear(p_db)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        assert_eq!(db_to_linear(0.0), 1.0);
        assert!((db_to_linear(20.0) - 100.0).abs() < 1e-12);
        assert!((linear_to_db(db_to_linear(13.7)) - 13.7).abs() < 1e-12);
        assert_eq!(power_from_db(10.0, 2.0), 20.0);
    }
}
