use std::io::Write;

use rand::Rng;

use super::ToyModel;
use crate::augment::SoftSentence;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub steps: usize,
    /// Examples per step, drawn with replacement; 0 uses the full set in order.
    pub batch_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.5,
            steps: 200,
            batch_size: 0,
        }
    }
}

/// Plain SGD with a fixed learning rate. Returns the trained model and the
/// mean batch loss recorded before each update.
pub fn train_toy<R: Rng + ?Sized>(
    model: &ToyModel,
    data: &[SoftSentence],
    labels: &[usize],
    config: &TrainConfig,
    rng: &mut R,
) -> Result<(ToyModel, Vec<f64>)> {
    if data.len() != labels.len() {
        return Err(Error::invalid("data and labels differ in length"));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= model.classes()) {
        return Err(Error::invalid(format!(
            "label {bad} out of range for {} classes",
            model.classes()
        )));
    }
    let mut model = model.clone();
    let mut trace = Vec::with_capacity(config.steps);
    if data.is_empty() {
        return Ok((model, trace));
    }
    let full: Vec<(&SoftSentence, usize)> = data.iter().zip(labels.iter().copied()).collect();
    let mut batch = Vec::with_capacity(config.batch_size);
    for _ in 0..config.steps {
        let (loss, grads) = if config.batch_size == 0 {
            model.batch_backward(&full)?
        } else {
            batch.clear();
            for _ in 0..config.batch_size {
                batch.push(full[rng.gen_range(0..full.len())]);
            }
            model.batch_backward(&batch)?
        };
        trace.push(loss);
        model.apply(&grads, config.lr);
    }
    Ok((model, trace))
}

/// Fraction of examples whose most probable class (ties to the smaller
/// index) equals the label.
pub fn evaluate(model: &ToyModel, data: &[SoftSentence], labels: &[usize]) -> Result<f64> {
    if data.len() != labels.len() {
        return Err(Error::invalid("data and labels differ in length"));
    }
    if data.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0usize;
    for (s, &label) in data.iter().zip(labels) {
        let p = model.forward(s)?;
        let mut best = 0;
        for (c, &x) in p.iter().enumerate() {
            if x > p[best] {
                best = c;
            }
        }
        correct += usize::from(best == label);
    }
    Ok(correct as f64 / data.len() as f64)
}

/// CSV with header `step,loss`.
pub fn write_loss_trace<W: Write>(trace: &[f64], mut w: W) -> std::io::Result<()> {
    writeln!(w, "step,loss")?;
    for (i, l) in trace.iter().enumerate() {
        writeln!(w, "{i},{l}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::Position;
    use crate::corpus::TokenId;
    use crate::rng::SplitMix64;

    /// Label 1 iff the marker token 4 occurs; fillers are ids 5..15.
    fn marker_task(n: usize, seed: u64) -> (Vec<SoftSentence>, Vec<usize>) {
        let mut rng = SplitMix64::new(seed);
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..n {
            let len = rng.gen_range(3..8);
            let mut toks: Vec<u32> = (0..len).map(|_| rng.gen_range(5..15)).collect();
            let label = rng.gen_range(0..2);
            if label == 1 {
                let at = rng.gen_range(0..len);
                toks[at] = 4;
            }
            data.push(SoftSentence::new(
                toks.into_iter().map(|t| Position::Hard(TokenId::new(t))).collect(),
            ));
            labels.push(label);
        }
        (data, labels)
    }

    #[test]
    fn zero_steps_leaves_model_unchanged() {
        let (data, labels) = marker_task(50, 1);
        let mut rng = SplitMix64::new(2);
        let model = ToyModel::init(15, 8, 2, &mut rng).unwrap();
        let cfg = TrainConfig { steps: 0, ..Default::default() };
        let (trained, trace) = train_toy(&model, &data, &labels, &cfg, &mut rng).unwrap();
        assert_eq!(trained, model);
        assert!(trace.is_empty());
        assert_eq!(
            evaluate(&trained, &data, &labels).unwrap(),
            evaluate(&model, &data, &labels).unwrap()
        );
    }

    #[test]
    fn loss_trend_decreases_on_separable_data() {
        let (data, labels) = marker_task(200, 3);
        let mut rng = SplitMix64::new(4);
        let model = ToyModel::init(15, 8, 2, &mut rng).unwrap();
        let cfg = TrainConfig { lr: 1.0, steps: 200, batch_size: 0 };
        let (_, trace) = train_toy(&model, &data, &labels, &cfg, &mut rng).unwrap();
        let windows: Vec<f64> = trace.chunks(10).map(|w| w.iter().sum::<f64>() / 10.0).collect();
        for w in windows.windows(2) {
            assert!(w[1] < w[0], "{windows:?}");
        }
    }

    #[test]
    fn marker_task_reaches_high_accuracy() {
        let (data, labels) = marker_task(400, 5);
        let (test, test_labels) = marker_task(200, 6);
        let mut rng = SplitMix64::new(7);
        let model = ToyModel::init(15, 8, 2, &mut rng).unwrap();
        let cfg = TrainConfig { lr: 1.0, steps: 400, batch_size: 32 };
        let (trained, _) = train_toy(&model, &data, &labels, &cfg, &mut rng).unwrap();
        let acc = evaluate(&trained, &test, &test_labels).unwrap();
        assert!(acc >= 0.95, "accuracy {acc}");
    }

    #[test]
    fn same_seed_same_trace() {
        let (data, labels) = marker_task(100, 8);
        let run = || {
            let mut rng = SplitMix64::new(9);
            let model = ToyModel::init(15, 8, 2, &mut rng).unwrap();
            let cfg = TrainConfig { lr: 0.5, steps: 50, batch_size: 16 };
            train_toy(&model, &data, &labels, &cfg, &mut rng).unwrap().1
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn label_out_of_range() {
        let (data, mut labels) = marker_task(10, 1);
        labels[3] = 2;
        let mut rng = SplitMix64::new(1);
        let model = ToyModel::init(15, 4, 2, &mut rng).unwrap();
        assert!(train_toy(&model, &data, &labels, &TrainConfig::default(), &mut rng).is_err());
    }

    #[test]
    fn loss_trace_csv() {
        let mut buf = Vec::new();
        write_loss_trace(&[0.5, 0.25], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "step,loss\n0,0.5\n1,0.25\n");
    }
}
