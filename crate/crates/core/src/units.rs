//! Boundary conversions. Internal arithmetic is linear (mW, radians).

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    db_to_linear(dbm)
}

/// `10 log10(mW)`; `None` for values that have no logarithm.
pub fn mw_to_dbm(mw: f64) -> Option<f64> {
    (mw > 0.0 && mw.is_finite()).then(|| linear_to_db(mw))
}
