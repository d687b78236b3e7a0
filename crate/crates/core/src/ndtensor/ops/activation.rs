use crate::ndtensor::scalar::Scalar;
use crate::ndtensor::tape::{Op, Tape, Var};
use crate::ndtensor::Tensor;

pub fn relu_forward<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Subgradient at exactly zero is 0.
pub(crate) fn relu_backward<T: Scalar>(g: &Tensor<T>, out: &Tensor<T>) -> Tensor<T> {
    let data = g
        .data()
        .iter()
        .zip(out.data())
        .map(|(&gv, &o)| if o > T::zero() { gv } else { T::zero() })
        .collect();
    Tensor::new(g.shape(), data).expect("same shape")
}

impl<T: Scalar> Tape<T> {
    pub fn relu(&mut self, input: Var) -> Var {
        let out = relu_forward(self.value(input));
        self.push(out, Op::Relu { input }, &[input])
    }
}
