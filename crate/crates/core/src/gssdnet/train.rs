use crate::ndtensor::{sgd_step, OptimizerState, ParamKind, Scalar, Tensor};

use super::model::Network;
use super::NetError;

/// Optimizer hyperparameters that stay fixed for a run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainerSettings {
    pub momentum: f64,
    pub weight_decay: f64,
    pub label_smoothing: f64,
}

impl Default for TrainerSettings {
    fn default() -> Self {
        Self { momentum: 0.9, weight_decay: 1e-4, label_smoothing: 0.1 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepReport {
    pub loss: f64,
    pub batch_size: usize,
}

/// SGD state bound to one network's learnable parameters. Fixed operators
/// and running statistics never enter the optimizer.
#[derive(Clone, Debug)]
pub struct Trainer<T> {
    settings: TrainerSettings,
    state: OptimizerState<T>,
}

impl<T: Scalar> Trainer<T> {
    pub fn new(net: &Network<T>, settings: TrainerSettings) -> Self {
        let groups = net.params().learnable().map(|(_, p)| {
            let exempt = matches!(p.kind, ParamKind::Learnable { decay_exempt: true });
            (p.value.shape(), exempt)
        });
        let state = OptimizerState::new(groups, settings.momentum, settings.weight_decay);
        Self { settings, state }
    }

    pub fn settings(&self) -> TrainerSettings {
        self.settings
    }

    /// One training-mode step on a normalized batch: forward, backward,
    /// SGD update, then the running batch-norm statistics.
    pub fn step(
        &mut self,
        net: &mut Network<T>,
        images: &Tensor<T>,
        labels: &[usize],
        lr: f64,
    ) -> Result<StepReport, NetError> {
        let (loss, grads, pass, _) = net.loss_and_gradients(images, labels, self.settings.label_smoothing, true)?;
        let ids = net.learnable_ids();
        {
            let mut values = net.params_mut().values_mut(&ids);
            let grad_refs: Vec<&Tensor<T>> = grads.iter().collect();
            sgd_step(&mut values, &grad_refs, &mut self.state, lr)?;
        }
        net.absorb(&pass.bn_updates);
        Ok(StepReport { loss, batch_size: labels.len() })
    }
}
