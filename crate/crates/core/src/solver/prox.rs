/// Block soft thresholding `max(1 - a / ||b||, 0) b`, in place. Maps 0 to 0.
pub fn block_soft_threshold(b: &mut [f64], a: f64) {
    let norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let shrink = if norm > 0.0 { (1.0 - a / norm).max(0.0) } else { 0.0 };
    b.iter_mut().for_each(|v| *v *= shrink);
}
