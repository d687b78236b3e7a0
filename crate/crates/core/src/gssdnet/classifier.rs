use crate::datasets::Normalization;
use crate::freqprobe::Classifier;
use crate::ndtensor::Tensor;

use super::model::Network;

/// Adapts a trained network to raw `[0, 1]` images: the training split's
/// normalization, then eval-mode argmax.
pub struct NetClassifier<'a> {
    net: &'a Network<f32>,
    norm: &'a Normalization,
}

impl<'a> NetClassifier<'a> {
    pub fn new(net: &'a Network<f32>, norm: &'a Normalization) -> Self {
        assert_eq!(norm.channels(), net.config().input_channels, "normalization channel count");
        Self { net, norm }
    }
}

impl Classifier for NetClassifier<'_> {
    fn classify(&self, images: &Tensor<f64>) -> Vec<usize> {
        let normalized = self.norm.apply(&images.cast::<f32>());
        self.net.predict(&normalized).expect("input channels checked at construction")
    }
}
