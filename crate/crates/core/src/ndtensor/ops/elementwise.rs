use crate::ndtensor::scalar::Scalar;
use crate::ndtensor::tape::{Op, Tape, Var};
use crate::ndtensor::{Tensor, TensorError};

pub(crate) fn hadamard<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Tensor<T> {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| x * y).collect();
    Tensor::new(a.shape(), data).expect("same shape")
}

impl<T: Scalar> Tape<T> {
    pub fn sum(&mut self, input: Var) -> Var {
        let s = self.value(input).sum();
        self.push(Tensor::scalar(s), Op::Sum { input }, &[input])
    }

    pub fn mul(&mut self, lhs: Var, rhs: Var) -> Result<Var, TensorError> {
        let (a, b) = (self.value(lhs), self.value(rhs));
        if a.shape() != b.shape() {
            return Err(TensorError::shape("elementwise operand", format!("{:?}", a.shape()), format!("{:?}", b.shape())));
        }
        let out = hadamard(a, b);
        Ok(self.push(out, Op::Mul { lhs, rhs }, &[lhs, rhs]))
    }
}
