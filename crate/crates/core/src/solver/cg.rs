use nalgebra::DMatrix;

/// Outcome of a conjugate-gradient solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgInfo {
    pub iterations: usize,
    /// `||b - A x|| / ||b||` at exit (absolute when `b = 0`).
    pub rel_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `A x = b` for symmetric positive definite `A`, given only through
/// `apply(v, out)` which writes `A v` into `out`. `x` holds the initial guess
/// on entry and the solution on exit.
pub fn conjugate_gradient(
    mut apply: impl FnMut(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iters: usize,
) -> CgInfo {
    let n = b.len();
    let b_norm = dot(b, b).sqrt();
    let scale = if b_norm > 0.0 { b_norm } else { 1.0 };
    let mut r = vec![0.0; n];
    apply(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut rr = dot(&r, &r);
    if rr.sqrt() <= tol * scale {
        return CgInfo { iterations: 0, rel_residual: rr.sqrt() / scale };
    }
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    for it in 1..=max_iters {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return CgInfo { iterations: it, rel_residual: rr.sqrt() / scale };
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        if rr_new.sqrt() <= tol * scale {
            return CgInfo { iterations: it, rel_residual: rr_new.sqrt() / scale };
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    CgInfo { iterations: max_iters, rel_residual: rr.sqrt() / scale }
}

/// Independent CG solves, one per row of `x` (`k x n`), for an operator that
/// acts on each row separately. `apply(v, out)` writes the operator applied
/// to every row of `v` into `out`. Each row keeps its own step sizes and
/// stops on its own, so the result matches `k` separate solves.
pub fn conjugate_gradient_rows(
    mut apply: impl FnMut(&DMatrix<f64>, &mut DMatrix<f64>),
    b: &DMatrix<f64>,
    x: &mut DMatrix<f64>,
    tol: f64,
    max_iters: usize,
) -> Vec<CgInfo> {
    let (k, n) = b.shape();
    let row_dots = |a: &DMatrix<f64>, c: &DMatrix<f64>| {
        let mut acc = vec![0.0; k];
        for (ca, cc) in a.as_slice().chunks_exact(k).zip(c.as_slice().chunks_exact(k)) {
            for ((s, x), y) in acc.iter_mut().zip(ca).zip(cc) {
                *s += x * y;
            }
        }
        acc
    };
    let scale: Vec<f64> = row_dots(b, b)
        .into_iter()
        .map(|v| if v > 0.0 { v.sqrt() } else { 1.0 })
        .collect();

    let mut r = DMatrix::zeros(k, n);
    apply(x, &mut r);
    for (ri, bi) in r.as_mut_slice().iter_mut().zip(b.as_slice()) {
        *ri = bi - *ri;
    }
    let mut rr = row_dots(&r, &r);
    let mut info: Vec<CgInfo> = (0..k)
        .map(|i| CgInfo { iterations: 0, rel_residual: rr[i].sqrt() / scale[i] })
        .collect();
    let mut active: Vec<bool> = (0..k).map(|i| rr[i].sqrt() > tol * scale[i]).collect();
    // 1 for rows still iterating, 0 for finished ones.
    let mut keep: Vec<f64> = active.iter().map(|&a| f64::from(u8::from(a))).collect();

    let mut p = r.clone();
    for col in p.as_mut_slice().chunks_exact_mut(k) {
        for (v, m) in col.iter_mut().zip(&keep) {
            *v *= m;
        }
    }
    let mut ap = DMatrix::zeros(k, n);
    let mut alpha = vec![0.0; k];
    let mut beta = vec![0.0; k];
    for it in 1..=max_iters {
        if !active.iter().any(|&a| a) {
            break;
        }
        apply(&p, &mut ap);
        let pap = row_dots(&p, &ap);
        for i in 0..k {
            alpha[i] = if active[i] && pap[i] > 0.0 { rr[i] / pap[i] } else { 0.0 };
        }
        for ((xc, rc), (pc, apc)) in x
            .as_mut_slice()
            .chunks_exact_mut(k)
            .zip(r.as_mut_slice().chunks_exact_mut(k))
            .zip(p.as_slice().chunks_exact(k).zip(ap.as_slice().chunks_exact(k)))
        {
            for ((((xv, rv), pv), av), al) in xc.iter_mut().zip(rc.iter_mut()).zip(pc).zip(apc).zip(&alpha) {
                *xv += al * pv;
                *rv -= al * av;
            }
        }
        let rr_new = row_dots(&r, &r);
        for i in 0..k {
            if !active[i] {
                continue;
            }
            info[i] = CgInfo { iterations: it, rel_residual: rr_new[i].sqrt() / scale[i] };
            if rr_new[i].sqrt() <= tol * scale[i] || pap[i] <= 0.0 {
                active[i] = false;
                keep[i] = 0.0;
                beta[i] = 0.0;
            } else {
                beta[i] = rr_new[i] / rr[i];
            }
            rr[i] = rr_new[i];
        }
        for (pc, rc) in p.as_mut_slice().chunks_exact_mut(k).zip(r.as_slice().chunks_exact(k)) {
            for (((pv, rv), bv), m) in pc.iter_mut().zip(rc).zip(&beta).zip(&keep) {
                *pv = m * (rv + bv * *pv);
            }
        }
    }
    info
}
