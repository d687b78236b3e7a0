use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("key '{0}' given twice")]
    Duplicate(String),
    #[error("unknown key '{0}'")]
    UnknownKey(String),
    #[error("key '{key}': cannot use '{value}' ({expected})")]
    BadValue { key: String, value: String, expected: String },
    #[error("invalid network: {0}")]
    Invalid(String),
}

/// Parses `key = value` lines; `#` starts a comment, blank lines are
/// skipped. Keys keep their order of appearance.
pub fn parse_kv(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| ConfigError::Syntax { line: i + 1, message: format!("expected 'key = value', got '{line}'") })?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(ConfigError::Syntax { line: i + 1, message: "empty key".into() });
        }
        if out.iter().any(|(existing, _)| existing == k) {
            return Err(ConfigError::Duplicate(k.to_owned()));
        }
        out.push((k.to_owned(), v.to_owned()));
    }
    Ok(out)
}

pub fn parse_value<V: FromStr>(key: &str, value: &str, expected: &str) -> Result<V, ConfigError> {
    value.parse().map_err(|_| ConfigError::BadValue {
        key: key.to_owned(),
        value: value.to_owned(),
        expected: expected.to_owned(),
    })
}

macro_rules! keyword_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
        pub enum $name { $($variant),+ }

        impl $name {
            pub fn as_str(self) -> &'static str {
                match self { $(Self::$variant => $text),+ }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($text => Ok(Self::$variant),)+
                    other => Err(format!("unknown value '{other}'")),
                }
            }
        }
    };
}

keyword_enum!(Arch { GssdNet => "gssdnet", Vanilla => "vanilla" });
keyword_enum!(DerivativeOrders { First => "first", Second => "second" });
keyword_enum!(Preset { Mini => "mini", MobileNetV1Width => "mobilenetv1-width" });

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BlockSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub stride: usize,
}

impl BlockSpec {
    pub const fn new(in_channels: usize, out_channels: usize, stride: usize) -> Self {
        Self { in_channels, out_channels, stride }
    }
}

impl Preset {
    /// Stem width and `(out_channels, stride)` per block at multiplier 1.
    pub fn layout(self) -> (usize, &'static [(usize, usize)]) {
        match self {
            Preset::Mini => (16, &[(32, 2), (32, 1), (64, 2), (64, 1), (128, 2), (128, 1)]),
            Preset::MobileNetV1Width => (
                32,
                &[
                    (64, 1),
                    (128, 2),
                    (128, 1),
                    (256, 2),
                    (256, 1),
                    (512, 2),
                    (512, 1),
                    (512, 1),
                    (512, 1),
                    (512, 1),
                    (512, 1),
                    (1024, 2),
                    (1024, 1),
                ],
            ),
        }
    }
}

/// `round(width * multiplier)`, bumped up to the next even number, at least 2.
pub fn apply_width_multiplier(widths: &[usize], multiplier: f64) -> Vec<usize> {
    widths
        .iter()
        .map(|&w| {
            let scaled = (w as f64 * multiplier).round() as usize;
            (scaled + scaled % 2).max(2)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkConfig {
    pub arch: Arch,
    pub preset: Preset,
    pub width_multiplier: f64,
    pub derivative_orders: DerivativeOrders,
    pub sigma_block: f64,
    pub sigma_stem: f64,
    pub num_classes: usize,
    pub input_channels: usize,
    pub stem_width: usize,
    pub blocks: Vec<BlockSpec>,
}

pub const NETWORK_KEYS: [&str; 8] = [
    "arch",
    "preset",
    "width_multiplier",
    "derivative_orders",
    "sigma_block",
    "sigma_stem",
    "num_classes",
    "input_channels",
];

impl NetworkConfig {
    /// Block stack derived from `preset` scaled by `width_multiplier`.
    pub fn from_preset(
        arch: Arch,
        preset: Preset,
        width_multiplier: f64,
        derivative_orders: DerivativeOrders,
        num_classes: usize,
        input_channels: usize,
    ) -> Result<Self, ConfigError> {
        if !(width_multiplier.is_finite() && width_multiplier > 0.0) {
            return Err(ConfigError::Invalid(format!("width multiplier {width_multiplier} must be > 0")));
        }
        let (stem, layout) = preset.layout();
        let mut widths = vec![stem];
        widths.extend(layout.iter().map(|&(w, _)| w));
        let widths = apply_width_multiplier(&widths, width_multiplier);
        let blocks = layout
            .iter()
            .enumerate()
            .map(|(i, &(_, stride))| BlockSpec::new(widths[i], widths[i + 1], stride))
            .collect();
        let config = Self {
            arch,
            preset,
            width_multiplier,
            derivative_orders,
            sigma_block: 1.0,
            sigma_stem: 1.0,
            num_classes,
            input_channels,
            stem_width: widths[0],
            blocks,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn mini(arch: Arch, num_classes: usize, input_channels: usize) -> Self {
        Self::from_preset(arch, Preset::Mini, 1.0, DerivativeOrders::Second, num_classes, input_channels)
            .expect("mini preset is valid")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.num_classes == 0 {
            return bad("num_classes must be at least 1".into());
        }
        if self.input_channels == 0 {
            return bad("input_channels must be at least 1".into());
        }
        for (name, s) in [("sigma_block", self.sigma_block), ("sigma_stem", self.sigma_stem)] {
            if !(s.is_finite() && s > 0.0) {
                return bad(format!("{name} must be finite and > 0, got {s}"));
            }
        }
        if self.blocks.is_empty() {
            return bad("at least one block is required".into());
        }
        let mut width = self.stem_width;
        for (i, b) in self.blocks.iter().enumerate() {
            if b.in_channels != width {
                return bad(format!("block {i} expects {} input channels but receives {width}", b.in_channels));
            }
            if b.in_channels % 2 != 0 || b.out_channels % 2 != 0 {
                return bad(format!(
                    "block {i} channel counts must be even, got {} -> {}",
                    b.in_channels, b.out_channels
                ));
            }
            if !matches!(b.stride, 1 | 2) {
                return bad(format!("block {i} stride must be 1 or 2, got {}", b.stride));
            }
            width = b.out_channels;
        }
        Ok(())
    }

    pub fn final_width(&self) -> usize {
        self.blocks.last().map_or(self.stem_width, |b| b.out_channels)
    }

    /// Builds from key-value pairs; keys outside [`NETWORK_KEYS`] are
    /// rejected.
    pub fn from_pairs(pairs: &[(String, String)]) -> Result<Self, ConfigError> {
        let mut arch = Arch::GssdNet;
        let mut preset = Preset::Mini;
        let mut wm = 1.0;
        let mut orders = DerivativeOrders::Second;
        let mut sigma_block = 1.0;
        let mut sigma_stem = 1.0;
        let mut num_classes = 10;
        let mut input_channels = 1;
        for (k, v) in pairs {
            match k.as_str() {
                "arch" => arch = parse_value(k, v, "gssdnet|vanilla")?,
                "preset" => preset = parse_value(k, v, "mini|mobilenetv1-width")?,
                "width_multiplier" => wm = parse_value(k, v, "positive number")?,
                "derivative_orders" => orders = parse_value(k, v, "first|second")?,
                "sigma_block" => sigma_block = parse_value(k, v, "positive number")?,
                "sigma_stem" => sigma_stem = parse_value(k, v, "positive number")?,
                "num_classes" => num_classes = parse_value(k, v, "positive integer")?,
                "input_channels" => input_channels = parse_value(k, v, "positive integer")?,
                other => return Err(ConfigError::UnknownKey(other.to_owned())),
            }
        }
        let mut config = Self::from_preset(arch, preset, wm, orders, num_classes, input_channels)?;
        config.sigma_block = sigma_block;
        config.sigma_stem = sigma_stem;
        config.validate()?;
        Ok(config)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::from_pairs(&parse_kv(text)?)
    }

    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("arch", self.arch.to_string()),
            ("preset", self.preset.to_string()),
            ("width_multiplier", self.width_multiplier.to_string()),
            ("derivative_orders", self.derivative_orders.to_string()),
            ("sigma_block", self.sigma_block.to_string()),
            ("sigma_stem", self.sigma_stem.to_string()),
            ("num_classes", self.num_classes.to_string()),
            ("input_channels", self.input_channels.to_string()),
        ]
    }

    pub fn to_kv(&self) -> String {
        self.to_pairs().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}
