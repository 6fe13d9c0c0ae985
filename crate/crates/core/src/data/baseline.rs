use super::Dataset;
use crate::error::{Error, Result};

/// 1-nearest-neighbour imputation: missing entries (`observed[t] == false`)
/// are copied from the training series closest in Euclidean distance over the
/// observed positions. Ties go to the lowest training index.
pub fn nn1_impute(train: &Dataset, series: &[f64], observed: &[bool]) -> Result<Vec<f64>> {
    if train.is_empty() {
        return Err(Error::Empty("1-NN imputation needs a training set".into()));
    }
    if series.len() != train.series_len() || observed.len() != series.len() {
        return Err(Error::Dimension(format!(
            "series of length {} against training length {}",
            series.len(),
            train.series_len()
        )));
    }
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, row) in train.values.iter().enumerate() {
        let d: f64 = row
            .iter()
            .zip(series)
            .zip(observed)
            .filter(|(_, &o)| o)
            .map(|((a, b), _)| (a - b) * (a - b))
            .sum();
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    Ok(series
        .iter()
        .zip(observed)
        .zip(&train.values[best])
        .map(|((&x, &o), &y)| if o { x } else { y })
        .collect())
}
