use super::HarnessError;

/// `log(e_i / e_{i+1}) / log(h_i / h_{i+1})` for each adjacent pair.
pub fn eoc(errors: &[f64], hs: &[f64]) -> Result<Vec<f64>, HarnessError> {
    if errors.len() != hs.len() {
        return Err(HarnessError::LengthMismatch { errors: errors.len(), hs: hs.len() });
    }
    if errors.len() < 2 {
        return Err(HarnessError::TooFewLevels(errors.len()));
    }
    if let Some((index, &value)) = errors.iter().enumerate().find(|(_, &e)| !(e > 0.0)) {
        return Err(HarnessError::NonPositiveError { index, value });
    }
    if let Some(index) = hs.windows(2).position(|w| !(w[1] < w[0])) {
        return Err(HarnessError::NotRefining { index: index + 1 });
    }
    Ok(errors
        .windows(2)
        .zip(hs.windows(2))
        .map(|(e, h)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        .collect())
}
