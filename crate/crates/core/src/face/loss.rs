use crate::{Error, Result};

fn check_shapes(predicted: &[Vec<f64>], truth: &[Vec<f64>]) -> Result<()> {
    if predicted.len() != truth.len() {
        return Err(Error::Dimension(format!("{} predicted frames vs {} true frames", predicted.len(), truth.len())));
    }
    if let Some((t, (p, b))) = predicted.iter().zip(truth).enumerate().find(|(_, (p, b))| p.len() != b.len()) {
        return Err(Error::Dimension(format!("frame {t}: {} predicted controls vs {} true", p.len(), b.len())));
    }
    Ok(())
}

/// `Σ_t Σ_i (b_ti − b̂_ti)²`.
pub fn rec_loss(predicted: &[Vec<f64>], truth: &[Vec<f64>]) -> Result<f64> {
    check_shapes(predicted, truth)?;
    Ok(predicted
        .iter()
        .zip(truth)
        .flat_map(|(p, b)| p.iter().zip(b).map(|(x, y)| (x - y) * (x - y)))
        .sum())
}

/// `Σ_{t≥2} Σ_i ((b_t − b_{t−1}) − (b̂_t − b̂_{t−1}))²`, zero for tracks
/// shorter than two frames.
pub fn vel_loss(predicted: &[Vec<f64>], truth: &[Vec<f64>]) -> Result<f64> {
    check_shapes(predicted, truth)?;
    Ok((1..predicted.len())
        .flat_map(|t| {
            (0..predicted[t].len()).map(move |i| {
                let d = (predicted[t][i] - predicted[t - 1][i]) - (truth[t][i] - truth[t - 1][i]);
                d * d
            })
        })
        .sum())
}
