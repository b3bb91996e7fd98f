use super::{NnError, Scalar, Tensor4};

/// Mean squared error over every element, with its gradient `2(p - t)/N`.
pub fn mse_loss<T: Scalar>(pred: &Tensor4<T>, target: &Tensor4<T>) -> Result<(T, Tensor4<T>), NnError> {
    if pred.dims() != target.dims() {
        return Err(NnError::Shape {
            layer: None,
            expected: format!("{:?}", target.dims()),
            actual: format!("{:?}", pred.dims()),
        });
    }
    let n = T::from_usize(pred.len()).expect("element count");
    let scale = T::from_f64_lossy(2.0) / n;
    let mut grad = Tensor4::zeros(pred.batch(), pred.shape());
    let mut sum = T::zero();
    for ((g, &p), &t) in grad.data_mut().iter_mut().zip(pred.data()).zip(target.data()) {
        let d = p - t;
        sum += d * d;
        *g = scale * d;
    }
    Ok((sum / n, grad))
}
