use gssd::gssdnet::{parse_kv, parse_value, ConfigError, NetworkConfig, NETWORK_KEYS};

use crate::data::{DataSpec, DATA_KEYS};

const TRAINING_KEYS: [&str; 9] = [
    "epochs",
    "batch_size",
    "base_lr",
    "warmup_epochs",
    "momentum",
    "weight_decay",
    "label_smoothing",
    "seed",
    "flip",
];

/// Everything a training run needs besides file locations.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub network: NetworkConfig,
    pub data: DataSpec,
    pub epochs: usize,
    pub batch_size: usize,
    pub base_lr: f64,
    pub warmup_epochs: usize,
    pub momentum: f64,
    pub weight_decay: f64,
    pub label_smoothing: f64,
    pub seed: u64,
    pub flip: bool,
}

impl RunConfig {
    /// Network, data and optimizer keys from one flat file. The class and
    /// channel counts default to the dataset's and must agree with it when
    /// given.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let pairs = parse_kv(text)?;
        if let Some((k, _)) = pairs
            .iter()
            .find(|(k, _)| !NETWORK_KEYS.contains(&k.as_str()) && !DATA_KEYS.contains(&k.as_str()) && !TRAINING_KEYS.contains(&k.as_str()))
        {
            return Err(ConfigError::UnknownKey(k.clone()));
        }
        let data = DataSpec::from_pairs(&pairs)?;
        let mut net_pairs: Vec<(String, String)> =
            pairs.iter().filter(|(k, _)| NETWORK_KEYS.contains(&k.as_str())).cloned().collect();
        for (key, derived) in [("num_classes", data.num_classes()), ("input_channels", data.kind.channels())] {
            match net_pairs.iter().find(|(k, _)| k == key) {
                Some((_, v)) => {
                    let given: usize = parse_value(key, v, "positive integer")?;
                    if given != derived {
                        return Err(ConfigError::Invalid(format!(
                            "{key} = {given} but the selected data has {derived}"
                        )));
                    }
                }
                None => net_pairs.push((key.to_owned(), derived.to_string())),
            }
        }
        let network = NetworkConfig::from_pairs(&net_pairs)?;

        let mut cfg = Self {
            network,
            data,
            epochs: 30,
            batch_size: 128,
            base_lr: 0.05,
            warmup_epochs: 5,
            momentum: 0.9,
            weight_decay: 1e-4,
            label_smoothing: 0.1,
            seed: 0,
            flip: false,
        };
        for (k, v) in &pairs {
            match k.as_str() {
                "epochs" => cfg.epochs = parse_value(k, v, "positive integer")?,
                "batch_size" => cfg.batch_size = parse_value(k, v, "positive integer")?,
                "base_lr" => cfg.base_lr = parse_value(k, v, "number")?,
                "warmup_epochs" => cfg.warmup_epochs = parse_value(k, v, "integer")?,
                "momentum" => cfg.momentum = parse_value(k, v, "number")?,
                "weight_decay" => cfg.weight_decay = parse_value(k, v, "number")?,
                "label_smoothing" => cfg.label_smoothing = parse_value(k, v, "number in [0, 1)")?,
                "seed" => cfg.seed = parse_value(k, v, "unsigned integer")?,
                "flip" => cfg.flip = parse_value(k, v, "true|false")?,
                _ => {}
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_owned()));
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.base_lr.is_finite() && self.base_lr >= 0.0) {
            return bad("base_lr must be finite and >= 0");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)");
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return bad("weight_decay must be finite and >= 0");
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return bad("label_smoothing must lie in [0, 1)");
        }
        Ok(())
    }

    /// Warmup shortened to leave at least one cosine epoch.
    pub fn effective_warmup(&self) -> usize {
        self.warmup_epochs.min(self.epochs - 1)
    }

    /// Full dump with every default spelled out; parses back to `self`.
    pub fn to_kv(&self) -> String {
        let mut s = self.network.to_kv();
        s += &self.data.to_kv();
        s += &format!(
            "epochs = {}\nbatch_size = {}\nbase_lr = {}\nwarmup_epochs = {}\nmomentum = {}\nweight_decay = {}\nlabel_smoothing = {}\nseed = {}\nflip = {}\n",
            self.epochs,
            self.batch_size,
            self.base_lr,
            self.warmup_epochs,
            self.momentum,
            self.weight_decay,
            self.label_smoothing,
            self.seed,
            self.flip
        );
        s
    }
}
