use super::checkpoint::{CheckpointError, Entry};
use super::scalar::Scalar;
use super::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamKind {
    /// Updated by the optimizer.
    Learnable { decay_exempt: bool },
    /// State that is not trained by gradient (running statistics).
    Buffer,
    /// Constant operator weights, never updated.
    Fixed,
}

#[derive(Clone, Debug)]
pub struct Param<T> {
    pub name: String,
    pub value: Tensor<T>,
    pub kind: ParamKind,
}

/// Named tensors in a stable insertion order; that order is the canonical
/// checkpoint order.
#[derive(Clone, Debug, Default)]
pub struct ParamStore<T> {
    params: Vec<Param<T>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParamId(pub(crate) usize);

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        Self { params: Vec::new() }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor<T>, kind: ParamKind) -> ParamId {
        let name = name.into();
        debug_assert!(self.params.iter().all(|p| p.name != name), "duplicate parameter {name}");
        self.params.push(Param { name, value, kind });
        ParamId(self.params.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Param<T> {
        &self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor<T> {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.params[id.0].value
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param<T>)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn learnable(&self) -> impl Iterator<Item = (ParamId, &Param<T>)> {
        self.iter().filter(|(_, p)| matches!(p.kind, ParamKind::Learnable { .. }))
    }

    pub fn learnable_count(&self) -> usize {
        self.learnable().map(|(_, p)| p.value.len()).sum()
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    /// Mutable references to several distinct parameters, in the order given.
    pub fn values_mut(&mut self, ids: &[ParamId]) -> Vec<&mut Tensor<T>> {
        let mut slots: Vec<Option<&mut Tensor<T>>> = self.params.iter_mut().map(|p| Some(&mut p.value)).collect();
        ids.iter().map(|id| slots[id.0].take().expect("distinct parameter ids")).collect()
    }

    pub fn cast<U: Scalar>(&self) -> ParamStore<U> {
        ParamStore {
            params: self
                .params
                .iter()
                .map(|p| Param { name: p.name.clone(), value: p.value.cast(), kind: p.kind })
                .collect(),
        }
    }

    pub fn to_entries(&self) -> Vec<Entry> {
        self.params
            .iter()
            .map(|p| Entry {
                name: p.name.clone(),
                extents: p.value.shape().map(|e| e as u32),
                data: p.value.data().iter().map(|v| v.as_f64() as f32).collect(),
            })
            .collect()
    }

    /// Overwrites every stored tensor from same-named entries.
    pub fn load_entries(&mut self, entries: &[Entry]) -> Result<(), CheckpointError> {
        for p in &mut self.params {
            let e = entries
                .iter()
                .find(|e| e.name == p.name)
                .ok_or_else(|| CheckpointError::MissingEntry(p.name.clone()))?;
            if e.shape() != p.value.shape() {
                return Err(CheckpointError::ShapeMismatch {
                    name: p.name.clone(),
                    expected: p.value.shape(),
                    found: e.shape(),
                });
            }
            let data = e.data.iter().map(|&v| T::from_f64_lossy(v as f64)).collect();
            p.value = Tensor::new(e.shape(), data).expect("checked extents");
        }
        Ok(())
    }
}
