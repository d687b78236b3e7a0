use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use gssd::datasets::{load_cifar100, load_mnist, Dataset, DatasetError};
use gssd::gssdnet::{parse_kv, parse_value, ConfigError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DatasetKind {
    Mnist,
    Cifar100,
}

impl DatasetKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DatasetKind::Mnist => "mnist",
            DatasetKind::Cifar100 => "cifar100",
        }
    }

    pub fn channels(self) -> usize {
        match self {
            DatasetKind::Mnist => 1,
            DatasetKind::Cifar100 => 3,
        }
    }

    fn all_classes(self) -> usize {
        match self {
            DatasetKind::Mnist => 10,
            DatasetKind::Cifar100 => 100,
        }
    }

    /// Directory under the data root holding this dataset's files.
    pub fn dir(self, root: &Path) -> PathBuf {
        match self {
            DatasetKind::Mnist => root.join("mnist"),
            DatasetKind::Cifar100 => root.join("cifar-100-binary"),
        }
    }

    pub fn files(self, root: &Path, split: Split) -> Vec<PathBuf> {
        let dir = self.dir(root);
        match (self, split) {
            (DatasetKind::Mnist, Split::Train) => {
                vec![dir.join("train-images-idx3-ubyte"), dir.join("train-labels-idx1-ubyte")]
            }
            (DatasetKind::Mnist, Split::Test) => {
                vec![dir.join("t10k-images-idx3-ubyte"), dir.join("t10k-labels-idx1-ubyte")]
            }
            (DatasetKind::Cifar100, Split::Train) => vec![dir.join("train.bin")],
            (DatasetKind::Cifar100, Split::Test) => vec![dir.join("test.bin")],
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mnist" => Ok(DatasetKind::Mnist),
            "cifar100" => Ok(DatasetKind::Cifar100),
            other => Err(format!("unknown dataset '{other}' (mnist|cifar100)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split '{other}' (train|test)")),
        }
    }
}

/// Which samples a run trains and evaluates on.
#[derive(Clone, Debug, PartialEq)]
pub struct DataSpec {
    pub kind: DatasetKind,
    pub subset: Option<Vec<usize>>,
    pub train_limit: Option<usize>,
    pub test_limit: Option<usize>,
}

pub const DATA_KEYS: [&str; 4] = ["dataset", "subset_classes", "train_limit", "test_limit"];

pub fn parse_subset(text: &str) -> Result<Vec<usize>, String> {
    text.split(',')
        .map(|s| s.trim().parse::<usize>().map_err(|_| format!("'{s}' is not a class index")))
        .collect()
}

impl DataSpec {
    pub fn new(kind: DatasetKind) -> Self {
        Self { kind, subset: None, train_limit: None, test_limit: None }
    }

    pub fn num_classes(&self) -> usize {
        self.subset.as_ref().map_or(self.kind.all_classes(), Vec::len)
    }

    /// Reads the keys of [`DATA_KEYS`]; anything else is ignored.
    pub fn from_pairs(pairs: &[(String, String)]) -> Result<Self, ConfigError> {
        let mut spec = Self::new(DatasetKind::Mnist);
        for (k, v) in pairs {
            match k.as_str() {
                "dataset" => spec.kind = parse_value(k, v, "mnist|cifar100")?,
                "subset_classes" => {
                    let classes = parse_subset(v).map_err(|why| ConfigError::BadValue {
                        key: k.clone(),
                        value: v.clone(),
                        expected: format!("comma-separated class indices: {why}"),
                    })?;
                    spec.subset = Some(classes);
                }
                "train_limit" => spec.train_limit = Some(parse_value(k, v, "positive integer")?),
                "test_limit" => spec.test_limit = Some(parse_value(k, v, "positive integer")?),
                _ => {}
            }
        }
        Ok(spec)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::from_pairs(&parse_kv(text)?)
    }

    pub fn to_kv(&self) -> String {
        let mut s = format!("dataset = {}\n", self.kind);
        if let Some(classes) = &self.subset {
            let list: Vec<String> = classes.iter().map(usize::to_string).collect();
            s += &format!("subset_classes = {}\n", list.join(","));
        }
        if let Some(n) = self.train_limit {
            s += &format!("train_limit = {n}\n");
        }
        if let Some(n) = self.test_limit {
            s += &format!("test_limit = {n}\n");
        }
        s
    }

    /// Loads one split with the class subset and sample limit applied. The
    /// dataset name encodes the selection so cached statistics of
    /// different selections never collide.
    pub fn load(&self, root: &Path, split: Split) -> Result<Dataset, DatasetError> {
        let files = self.kind.files(root, split);
        let mut data = match self.kind {
            DatasetKind::Mnist => {
                let mut d = load_mnist(&files[0], &files[1])?;
                if let Some(classes) = &self.subset {
                    d = select_classes(&d, classes)?;
                }
                d
            }
            DatasetKind::Cifar100 => load_cifar100(&files[0], self.subset.as_deref())?,
        };
        if let Some(classes) = &self.subset {
            let list: Vec<String> = classes.iter().map(usize::to_string).collect();
            data.name = format!("{}-classes{}", data.name, list.join("-"));
        }
        let limit = match split {
            Split::Train => self.train_limit,
            Split::Test => self.test_limit,
        };
        if let Some(n) = limit.filter(|&n| n < data.len()) {
            data = data.head(n);
            data.name = format!("{}-first{n}", data.name);
        }
        Ok(data)
    }
}

/// Keeps the listed classes of an in-memory dataset, relabelled by position.
fn select_classes(data: &Dataset, classes: &[usize]) -> Result<Dataset, DatasetError> {
    if classes.is_empty() {
        return Err(DatasetError::EmptySubset);
    }
    let mut remap = vec![None; data.num_classes];
    for (pos, &c) in classes.iter().enumerate() {
        let slot = remap
            .get_mut(c)
            .ok_or_else(|| DatasetError::BadSubset(format!("class {c} outside [0, {})", data.num_classes)))?;
        if slot.replace(pos).is_some() {
            return Err(DatasetError::BadSubset(format!("class {c} listed twice")));
        }
    }
    let keep: Vec<usize> = (0..data.len()).filter(|&i| remap[data.labels[i]].is_some()).collect();
    let picked = data.select(&keep);
    let labels = picked.labels.iter().map(|&y| remap[y].expect("kept")).collect();
    Dataset::new(picked.name, picked.split, picked.images, labels, classes.len())
}

/// `--data-dir`, else `GSSD_DATA_DIR`, else `./data`.
pub fn data_root(flag: Option<&Path>) -> PathBuf {
    flag.map(Path::to_owned)
        .or_else(|| std::env::var_os("GSSD_DATA_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("data"))
}
