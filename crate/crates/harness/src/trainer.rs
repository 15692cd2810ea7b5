//! Single training runs: mini-batch loop, learning-rate schedule, per-epoch
//! metric records and termination status.

use std::time::Instant;

use nc_core::metrics::{compute_class_statistics, LabeledFeatures, MetricSuite};
use nc_core::models::{accuracy, ce_loss_and_grad, make_blob_dataset, MlpModel, SyntheticDataset, UfmModel};
use nc_core::optim::{LrScheduler, OscillationDetector, Optimizer, ScheduleKind};
use nc_core::rng::{self, Rng};
use nc_core::tensor::singular_values;
use nc_core::{DenseMatrix, Error as CoreError};
use rand::seq::SliceRandom;
use serde::Serialize;

use crate::config::{ExperimentConfig, ModelKind, WeightInit};
use crate::error::Result;

/// One row of the per-epoch log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRecord {
    pub epoch: usize,
    /// Learning rate used during this epoch (the base rate at epoch 0).
    pub lr: f64,
    pub train_loss: f64,
    pub train_acc: f64,
    pub metrics: MetricSuite,
    pub sigma_min_w: Option<f64>,
    /// Mean singular value excluding the smallest.
    pub sigma_avg_w: Option<f64>,
    pub sigma_min_m: Option<f64>,
    pub sigma_avg_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    /// Accuracy never rose clearly above chance after the first fifth of
    /// training, the usual sign of over-regularization.
    DidNotTrain,
    Diverged { epoch: usize, reason: String },
}

impl RunStatus {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Completed => "completed",
            Self::DidNotTrain => "did_not_train",
            Self::Diverged { .. } => "diverged",
        }
    }
}

#[derive(Debug, Clone)]
pub enum Model {
    Ufm(UfmModel),
    Mlp {
        model: MlpModel,
        data: SyntheticDataset,
        /// One-hot targets for `data`.
        y: DenseMatrix,
    },
}

impl Model {
    pub fn from_config(config: &ExperimentConfig) -> Result<Self> {
        let d = &config.data;
        let mut model = match config.model.kind {
            ModelKind::Ufm => Model::Ufm(UfmModel::random(d.k, d.d, d.per_class, config.seed)?),
            ModelKind::UfmFixedFeatures => {
                let mut m = UfmModel::theorem_setting(d.k)?;
                if config.model.w_init == WeightInit::Random {
                    let mut r = rng::seeded(config.seed);
                    m.w = rng::gaussian_matrix(d.k, d.k, nc_core::models::INIT_STD, &mut r);
                }
                Model::Ufm(m)
            }
            ModelKind::Mlp => {
                let data = make_blob_dataset(d.k, d.d, d.per_class, d.margin, d.seed)?;
                let model = MlpModel::new(d.d, &config.model.hidden_sizes, d.k, config.seed)?;
                let y = data.one_hot()?;
                Model::Mlp { model, data, y }
            }
        };
        if config.model.w_init == WeightInit::Zero {
            let w = model.last_layer_mut();
            *w = DenseMatrix::zeros(w.rows(), w.cols());
        }
        Ok(model)
    }

    pub fn last_layer(&self) -> &DenseMatrix {
        match self {
            Model::Ufm(m) => &m.w,
            Model::Mlp { model, .. } => &model.last,
        }
    }

    fn last_layer_mut(&mut self) -> &mut DenseMatrix {
        match self {
            Model::Ufm(m) => &mut m.w,
            Model::Mlp { model, .. } => &mut model.last,
        }
    }

    pub fn num_samples(&self) -> usize {
        match self {
            Model::Ufm(m) => m.h.cols(),
            Model::Mlp { data, .. } => data.num_samples(),
        }
    }

    pub fn num_classes(&self) -> usize {
        self.last_layer().rows()
    }

    pub fn labels(&self) -> &[usize] {
        match self {
            Model::Ufm(m) => m.labels(),
            Model::Mlp { data, .. } => &data.labels,
        }
    }

    fn params(&self) -> Vec<&DenseMatrix> {
        match self {
            Model::Ufm(m) if m.feature_trainable => vec![&m.w, &m.h],
            Model::Ufm(m) => vec![&m.w],
            Model::Mlp { model, .. } => model.params(),
        }
    }

    /// Position of the last-layer weights in the optimizer's parameter list.
    fn last_layer_index(&self) -> usize {
        match self {
            Model::Ufm(_) => 0,
            Model::Mlp { model, .. } => model.params().len() - 1,
        }
    }

    /// Loss, logits and last-layer features on the full training set.
    fn forward(&self) -> nc_core::Result<(f64, DenseMatrix, DenseMatrix)> {
        match self {
            Model::Ufm(m) => {
                let out = ce_loss_and_grad(&m.w, &m.h, &m.y)?;
                Ok((out.loss, m.logits()?, m.h.clone()))
            }
            Model::Mlp { model, data, y } => {
                let out = model.forward_backward(&data.x, y)?;
                Ok((out.loss, out.logits, out.features))
            }
        }
    }
}

/// Full-set evaluation of the current model.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub loss: f64,
    pub accuracy: f64,
    pub metrics: Option<MetricSuite>,
    pub sigma_w: Vec<f64>,
    pub sigma_m: Vec<f64>,
}

fn sigma_summary(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    let min = v.pop();
    let avg = (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    (min, avg)
}

/// Owns one run's model, optimizer, schedule and shuffling stream.
pub struct Trainer {
    config: ExperimentConfig,
    model: Model,
    optimizer: Optimizer,
    scheduler: LrScheduler,
    detector: Option<OscillationDetector>,
    shuffle: Rng,
    epoch: usize,
    steps: u64,
    last_lr: f64,
}

/// Result of one epoch.
#[derive(Debug, Clone, PartialEq)]
pub enum EpochOutcome {
    Ok,
    Diverged(String),
}

impl Trainer {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let model = Model::from_config(config)?;
        Self::with_model(config, model)
    }

    pub fn with_model(config: &ExperimentConfig, model: Model) -> Result<Self> {
        let optimizer = Optimizer::new(config.optimizer.clone(), &model.params())?;
        let scheduler = LrScheduler::new(config.optimizer.schedule.clone(), config.optimizer.learning_rate);
        let detector = (config.optimizer.schedule.kind == ScheduleKind::OscillationDecay)
            .then(OscillationDetector::default);
        Ok(Self {
            config: config.clone(),
            model,
            optimizer,
            scheduler,
            detector,
            // A separate stream from initialization.
            shuffle: rng::seeded(config.seed.wrapping_add(0x9e37_79b9_7f4a_7c15)),
            epoch: 0,
            steps: 0,
            last_lr: config.optimizer.learning_rate,
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn into_model(self) -> Model {
        self.model
    }

    pub fn last_layer(&self) -> &DenseMatrix {
        self.model.last_layer()
    }

    /// Epochs completed so far.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn decay_events(&self) -> u32 {
        self.scheduler.decay_events()
    }

    pub fn last_lr(&self) -> f64 {
        self.last_lr
    }

    fn batches(&mut self) -> Vec<Vec<usize>> {
        let n = self.model.num_samples();
        let b = self.config.effective_batch_size().min(n);
        let mut idx: Vec<usize> = (0..n).collect();
        if b == n {
            return vec![idx];
        }
        idx.shuffle(&mut self.shuffle);
        idx.chunks(b).map(<[usize]>::to_vec).collect()
    }

    /// One pass over the training set.
    pub fn run_epoch(&mut self) -> Result<EpochOutcome> {
        for batch in self.batches() {
            let lr = self.scheduler.lr_at(self.epoch, self.config.epochs);
            self.last_lr = lr;
            match self.step(&batch, lr) {
                Ok(loss) if loss.is_finite() => {}
                Ok(loss) => return Ok(EpochOutcome::Diverged(format!("training loss became {loss}"))),
                Err(CoreError::Numeric(msg)) => return Ok(EpochOutcome::Diverged(msg)),
                Err(e) => return Err(e.into()),
            }
        }
        self.epoch += 1;
        Ok(EpochOutcome::Ok)
    }

    fn step(&mut self, batch: &[usize], lr: f64) -> nc_core::Result<f64> {
        let last = self.model.last_layer_index();
        let (loss, grads) = match &self.model {
            Model::Ufm(m) => {
                let g = m.loss_and_grads_on(batch)?;
                let mut grads = vec![g.grad_w];
                grads.extend(g.grad_h);
                (g.loss, grads)
            }
            Model::Mlp { model, data, y } => {
                let out = if batch.len() == data.num_samples() {
                    model.forward_backward(&data.x, y)?
                } else {
                    model.forward_backward(&data.x.select_columns(batch)?, &y.select_columns(batch)?)?
                };
                (out.loss, out.grads)
            }
        };
        if !loss.is_finite() {
            return Ok(loss);
        }
        let argument = match &self.detector {
            Some(_) => Some(self.optimizer.sign_argument(last, self.model.last_layer(), &grads[last])?),
            None => None,
        };
        let grad_refs: Vec<&DenseMatrix> = grads.iter().collect();
        let mut params: Vec<&mut DenseMatrix> = match &mut self.model {
            Model::Ufm(m) if m.feature_trainable => vec![&mut m.w, &mut m.h],
            Model::Ufm(m) => vec![&mut m.w],
            Model::Mlp { model, .. } => model.params_mut(),
        };
        self.optimizer.step(lr, &mut params, &grad_refs)?;
        if !params.iter().all(|p| p.is_finite()) {
            return Err(CoreError::Numeric("parameters became non-finite".into()));
        }
        self.steps += 1;
        if let (Some(det), Some(arg)) = (&mut self.detector, argument) {
            if det.observe(&arg) {
                self.scheduler.signal_decay();
                log::debug!("oscillation decay event {} at step {}", self.scheduler.decay_events(), self.steps);
            }
        }
        Ok(loss)
    }

    /// Loss and accuracy on the full training set, plus the metric suite and
    /// singular values when `with_metrics` is set.
    pub fn evaluate(&self, with_metrics: bool) -> Result<Evaluation> {
        let (loss, logits, features) = self.model.forward()?;
        let acc = accuracy(&logits, self.model.labels());
        let mut ev = Evaluation {
            loss,
            accuracy: acc,
            metrics: None,
            sigma_w: Vec::new(),
            sigma_m: Vec::new(),
        };
        if with_metrics {
            let w = self.model.last_layer();
            let data = LabeledFeatures::new(features, self.model.labels().to_vec(), self.model.num_classes())?;
            let stats = compute_class_statistics(&data)?;
            ev.metrics = Some(MetricSuite::from_statistics(w, &stats, data.features())?);
            ev.sigma_w = singular_values(w)?;
            ev.sigma_m = singular_values(&stats.centered_means)?;
        }
        Ok(ev)
    }

    /// Evaluates with metrics and packages the result as a log row.
    pub fn record(&self) -> Result<MetricRecord> {
        let ev = self.evaluate(true)?;
        Ok(self.record_from(ev))
    }

    fn record_from(&self, ev: Evaluation) -> MetricRecord {
        let (sigma_min_w, sigma_avg_w) = sigma_summary(&ev.sigma_w);
        let (sigma_min_m, sigma_avg_m) = sigma_summary(&ev.sigma_m);
        MetricRecord {
            epoch: self.epoch,
            lr: self.last_lr,
            train_loss: ev.loss,
            train_acc: ev.accuracy,
            metrics: ev.metrics.unwrap_or_default(),
            sigma_min_w,
            sigma_avg_w,
            sigma_min_m,
            sigma_avg_m,
        }
    }
}

/// Everything a finished run produced.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub config: ExperimentConfig,
    pub records: Vec<MetricRecord>,
    pub status: RunStatus,
    pub model: Model,
    pub wall_time_secs: f64,
    pub steps: u64,
    pub decay_events: u32,
}

impl TrainOutcome {
    pub fn final_record(&self) -> Option<&MetricRecord> {
        self.records.last()
    }
}

/// Runs `config` to completion, logging metrics at epoch 0, every
/// `metric_period` epochs and at the last epoch.
pub fn run_training(config: &ExperimentConfig) -> Result<TrainOutcome> {
    let start = Instant::now();
    let mut trainer = Trainer::new(config)?;
    let mut records = vec![trainer.record()?];
    let total = config.epochs;
    let check_from = (total as f64 * 0.2).ceil() as usize;
    let chance = 1.0 / trainer.model().num_classes() as f64 + 0.05;
    let mut trained = false;
    let mut status = None;

    for e in 1..=total {
        if let EpochOutcome::Diverged(reason) = trainer.run_epoch()? {
            log::warn!("run diverged in epoch {e}: {reason}");
            records.push(diagnostic_record(e, trainer.last_lr()));
            status = Some(RunStatus::Diverged { epoch: e, reason });
            break;
        }
        let log_now = e % config.metric_period == 0 || e == total;
        let ev = match trainer.evaluate(log_now) {
            Ok(ev) => ev,
            Err(crate::HarnessError::Core(CoreError::Numeric(reason))) => {
                records.push(diagnostic_record(e, trainer.last_lr()));
                status = Some(RunStatus::Diverged { epoch: e, reason });
                break;
            }
            Err(err) => return Err(err),
        };
        if e >= check_from && ev.accuracy > chance {
            trained = true;
        }
        if log_now {
            let r = trainer.record_from(ev);
            log::info!(
                "epoch {e}/{total}: loss {:.6} acc {:.4} alpha {:?}",
                r.train_loss,
                r.train_acc,
                r.metrics.nc0_alpha
            );
            records.push(r);
        }
    }

    let status = status.unwrap_or(if trained {
        RunStatus::Completed
    } else {
        RunStatus::DidNotTrain
    });
    Ok(TrainOutcome {
        config: config.clone(),
        records,
        status,
        steps: trainer.steps(),
        decay_events: trainer.decay_events(),
        model: trainer.into_model(),
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

fn diagnostic_record(epoch: usize, lr: f64) -> MetricRecord {
    MetricRecord {
        epoch,
        lr,
        train_loss: f64::NAN,
        train_acc: f64::NAN,
        metrics: MetricSuite::default(),
        sigma_min_w: None,
        sigma_avg_w: None,
        sigma_min_m: None,
        sigma_avg_m: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nc_core::optim::{OptimizerConfig, OptimizerKind};

    fn small_mlp(kind: OptimizerKind, wd: f64, epochs: usize) -> ExperimentConfig {
        ExperimentConfig {
            optimizer: OptimizerConfig::new(kind, 0.05, wd).with_momentum(0.9),
            epochs,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn sigma_summary_excludes_smallest() {
        assert_eq!(sigma_summary(&[3.0, 1.0, 2.0]), (Some(1.0), Some(2.5)));
        assert_eq!(sigma_summary(&[4.0]), (Some(4.0), None));
        assert_eq!(sigma_summary(&[]), (None, None));
    }

    #[test]
    fn logs_initial_periodic_and_final_epochs() {
        let mut c = small_mlp(OptimizerKind::SgdCoupled, 0.0, 7);
        c.metric_period = 3;
        let out = run_training(&c).unwrap();
        let epochs: Vec<usize> = out.records.iter().map(|r| r.epoch).collect();
        assert_eq!(epochs, vec![0, 3, 6, 7]);
        assert_eq!(out.steps, 7);
    }

    #[test]
    fn blobs_are_learned() {
        let out = run_training(&small_mlp(OptimizerKind::SgdCoupled, 5e-4, 200)).unwrap();
        assert_eq!(out.status, RunStatus::Completed);
        let last = out.final_record().unwrap();
        assert_eq!(last.train_acc, 1.0);
        assert!(last.train_loss < out.records[0].train_loss);
    }

    #[test]
    fn heavy_decay_does_not_train() {
        let mut c = small_mlp(OptimizerKind::SgdDecoupled, 15.0, 40);
        c.optimizer.momentum = 0.0;
        let out = run_training(&c).unwrap();
        assert_eq!(out.status, RunStatus::DidNotTrain);
    }

    #[test]
    fn huge_learning_rate_diverges() {
        let mut c = small_mlp(OptimizerKind::SgdCoupled, 0.0, 50);
        c.model.hidden_sizes = vec![64, 64];
        c.optimizer.learning_rate = 1e6;
        let out = run_training(&c).unwrap();
        assert!(matches!(out.status, RunStatus::Diverged { .. }), "{:?}", out.status);
        assert!(out.final_record().unwrap().train_loss.is_nan());
    }

    #[test]
    fn minibatches_cover_every_sample() {
        let mut c = small_mlp(OptimizerKind::SgdCoupled, 0.0, 1);
        c.batch_size = Some(30);
        let mut t = Trainer::new(&c).unwrap();
        let batches = t.batches();
        assert_eq!(batches.len(), 4);
        let mut all: Vec<usize> = batches.concat();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        t.run_epoch().unwrap();
        assert_eq!(t.steps(), 4);
    }

    #[test]
    fn fixed_feature_ufm_starts_at_zero() {
        let c = ExperimentConfig::parse("model.kind = ufm_fixed_features\ndata.k = 4\nepochs = 1\n").unwrap();
        let t = Trainer::new(&c).unwrap();
        assert_eq!(t.last_layer().max_abs(), 0.0);
        let rec = t.record().unwrap();
        assert!((rec.train_loss - 4f64.ln()).abs() < 1e-15);
        assert_eq!(rec.metrics.nc2wa, None);
        assert_eq!(rec.metrics.nc0_normalized, None);
        assert!(rec.metrics.nc2a.is_some());
    }
}
