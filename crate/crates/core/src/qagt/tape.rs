//! Minimal reverse-mode autodiff over dense row-major matrices, with the
//! handful of fused operations the corrector needs.

#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len(), "shape does not match data");
        Self { rows, cols, data }
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    fn add_assign(&mut self, other: &Mat) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

/// `c += a * b` for row-major operands.
fn gemm_acc(a: &Mat, b: &Mat, c: &mut Mat) {
    for i in 0..a.rows {
        let crow = &mut c.data[i * b.cols..(i + 1) * b.cols];
        for (k, &aik) in a.row(i).iter().enumerate() {
            if aik != 0.0 {
                for (cj, bkj) in crow.iter_mut().zip(b.row(k)) {
                    *cj += aik * bkj;
                }
            }
        }
    }
}

/// `c += a^T * b`.
fn gemm_at_b_acc(a: &Mat, b: &Mat, c: &mut Mat) {
    for k in 0..a.rows {
        let brow = b.row(k);
        for (i, &aki) in a.row(k).iter().enumerate() {
            if aki != 0.0 {
                let crow = &mut c.data[i * b.cols..(i + 1) * b.cols];
                for (cj, bkj) in crow.iter_mut().zip(brow) {
                    *cj += aki * bkj;
                }
            }
        }
    }
}

/// `c += a * b^T`.
fn gemm_a_bt_acc(a: &Mat, b: &Mat, c: &mut Mat) {
    for i in 0..a.rows {
        let arow = a.row(i);
        for j in 0..b.rows {
            let dot: f64 = arow.iter().zip(b.row(j)).map(|(x, y)| x * y).sum();
            c.data[i * c.cols + j] += dot;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

/// Attention coefficients of one GAT aggregation: `alpha[i][h][m]` is the
/// weight node `i` gives to its `m`-th neighbour under head `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct Attention {
    pub alpha: Vec<Vec<Vec<f64>>>,
}

enum Op<'a> {
    Leaf,
    MatMul(Var, Var),
    AddRow(Var, Var),
    Add(Var, Var),
    LeakyRelu(Var, f64),
    Elu(Var),
    Relu(Var),
    HeadDot {
        x: Var,
        a: Var,
        heads: usize,
    },
    Gat {
        h: Var,
        src: Var,
        dst: Var,
        heads: usize,
        slope: f64,
        nbrs: &'a [Vec<usize>],
        /// Pre-activation scores, aligned with `alpha`.
        z: Vec<Vec<Vec<f64>>>,
        alpha: Vec<Vec<Vec<f64>>>,
    },
    SegmentMean(Var, &'a [Vec<usize>]),
    ConcatBroadcast(Var, Var),
    RowDot(Var, Var),
    Affine(Var, Vec<f64>),
    Mse(Var, Vec<f64>),
}

struct Node<'a> {
    value: Mat,
    op: Op<'a>,
}

pub struct Tape<'a> {
    nodes: Vec<Node<'a>>,
}

impl<'a> Default for Tape<'a> {
    fn default() -> Self {
        Self::new()
    }
}

impl<'a> Tape<'a> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    fn push(&mut self, value: Mat, op: Op<'a>) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Mat {
        &self.nodes[v.0].value
    }

    pub fn leaf(&mut self, value: Mat) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (ma, mb) = (self.value(a), self.value(b));
        assert_eq!(ma.cols, mb.rows, "matmul shape mismatch");
        let mut out = Mat::zeros(ma.rows, mb.cols);
        gemm_acc(ma, mb, &mut out);
        self.push(out, Op::MatMul(a, b))
    }

    /// Adds the `1 x c` row `b` to every row of `a`.
    pub fn add_row(&mut self, a: Var, b: Var) -> Var {
        let (ma, mb) = (self.value(a), self.value(b));
        assert_eq!((mb.rows, mb.cols), (1, ma.cols), "bias shape mismatch");
        let mut out = ma.clone();
        for r in 0..out.rows {
            for (o, bb) in out.row_mut(r).iter_mut().zip(&mb.data) {
                *o += bb;
            }
        }
        self.push(out, Op::AddRow(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let (ma, mb) = (self.value(a), self.value(b));
        assert_eq!((ma.rows, ma.cols), (mb.rows, mb.cols), "add shape mismatch");
        let mut out = ma.clone();
        out.add_assign(mb);
        self.push(out, Op::Add(a, b))
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let mut out = self.value(a).clone();
        out.data.iter_mut().for_each(|x| {
            if *x < 0.0 {
                *x *= slope
            }
        });
        self.push(out, Op::LeakyRelu(a, slope))
    }

    pub fn elu(&mut self, a: Var) -> Var {
        let mut out = self.value(a).clone();
        out.data.iter_mut().for_each(|x| {
            if *x < 0.0 {
                *x = x.exp_m1()
            }
        });
        self.push(out, Op::Elu(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let mut out = self.value(a).clone();
        out.data.iter_mut().for_each(|x| *x = x.max(0.0));
        self.push(out, Op::Relu(a))
    }

    /// Per-head dot products: `x` is `n x (heads * d)`, `a` is `heads x d`,
    /// the result is `n x heads`.
    pub fn head_dot(&mut self, x: Var, a: Var, heads: usize) -> Var {
        let (mx, ma) = (self.value(x), self.value(a));
        let d = ma.cols;
        assert_eq!(
            (ma.rows, mx.cols),
            (heads, heads * d),
            "head_dot shape mismatch"
        );
        let mut out = Mat::zeros(mx.rows, heads);
        for i in 0..mx.rows {
            let row = mx.row(i);
            for h in 0..heads {
                out.data[i * heads + h] = row[h * d..(h + 1) * d]
                    .iter()
                    .zip(ma.row(h))
                    .map(|(p, q)| p * q)
                    .sum();
            }
        }
        self.push(out, Op::HeadDot { x, a, heads })
    }

    /// Multi-head additive attention. Node `i` aggregates `h` over
    /// `nbrs[i]` with weights `softmax_j LeakyReLU(src[j] + dst[i])`.
    pub fn gat(
        &mut self,
        h: Var,
        src: Var,
        dst: Var,
        heads: usize,
        slope: f64,
        nbrs: &'a [Vec<usize>],
    ) -> Var {
        let (mh, ms, md) = (self.value(h), self.value(src), self.value(dst));
        let n = mh.rows;
        let d = mh.cols / heads;
        assert_eq!(nbrs.len(), n, "neighbour list length mismatch");
        let mut out = Mat::zeros(n, mh.cols);
        let mut zs = Vec::with_capacity(n);
        let mut alphas = Vec::with_capacity(n);
        for (i, nb) in nbrs.iter().enumerate() {
            let mut zi = Vec::with_capacity(heads);
            let mut ai = Vec::with_capacity(heads);
            for hh in 0..heads {
                let z: Vec<f64> = nb
                    .iter()
                    .map(|&j| ms.data[j * heads + hh] + md.data[i * heads + hh])
                    .collect();
                let e: Vec<f64> = z
                    .iter()
                    .map(|&v| if v < 0.0 { slope * v } else { v })
                    .collect();
                let max = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let w: Vec<f64> = e.iter().map(|v| (v - max).exp()).collect();
                let sum: f64 = w.iter().sum();
                let alpha: Vec<f64> = w.iter().map(|v| v / sum).collect();
                let orow = &mut out.data[i * mh.cols + hh * d..i * mh.cols + (hh + 1) * d];
                for (&j, &a) in nb.iter().zip(&alpha) {
                    for (o, x) in orow.iter_mut().zip(&mh.row(j)[hh * d..(hh + 1) * d]) {
                        *o += a * x;
                    }
                }
                zi.push(z);
                ai.push(alpha);
            }
            zs.push(zi);
            alphas.push(ai);
        }
        self.push(
            out,
            Op::Gat {
                h,
                src,
                dst,
                heads,
                slope,
                nbrs,
                z: zs,
                alpha: alphas,
            },
        )
    }

    pub fn attention(&self, v: Var) -> Option<Attention> {
        match &self.nodes[v.0].op {
            Op::Gat { alpha, .. } => Some(Attention {
                alpha: alpha.clone(),
            }),
            _ => None,
        }
    }

    /// Row `k` of the result is the mean of the rows of `x` listed in
    /// `segments[k]`.
    pub fn segment_mean(&mut self, x: Var, segments: &'a [Vec<usize>]) -> Var {
        let mx = self.value(x);
        let mut out = Mat::zeros(segments.len(), mx.cols);
        for (k, seg) in segments.iter().enumerate() {
            assert!(!seg.is_empty(), "empty pooling segment");
            let inv = 1.0 / seg.len() as f64;
            let orow = out.row_mut(k);
            for &r in seg {
                for (o, v) in orow.iter_mut().zip(mx.row(r)) {
                    *o += v * inv;
                }
            }
        }
        self.push(out, Op::SegmentMean(x, segments))
    }

    /// `[a | b]` with the single row `b` repeated for every row of `a`.
    pub fn concat_broadcast(&mut self, a: Var, b: Var) -> Var {
        let (ma, mb) = (self.value(a), self.value(b));
        assert_eq!(mb.rows, 1, "broadcast operand must be a row");
        let cols = ma.cols + mb.cols;
        let mut out = Mat::zeros(ma.rows, cols);
        for r in 0..ma.rows {
            let orow = out.row_mut(r);
            orow[..ma.cols].copy_from_slice(ma.row(r));
            orow[ma.cols..].copy_from_slice(&mb.data);
        }
        self.push(out, Op::ConcatBroadcast(a, b))
    }

    /// `out[k] = a[k, :] . b[k, :]` as a column.
    pub fn row_dot(&mut self, a: Var, b: Var) -> Var {
        let (ma, mb) = (self.value(a), self.value(b));
        assert_eq!(
            (ma.rows, ma.cols),
            (mb.rows, mb.cols),
            "row_dot shape mismatch"
        );
        let data = (0..ma.rows)
            .map(|r| ma.row(r).iter().zip(mb.row(r)).map(|(x, y)| x * y).sum())
            .collect();
        self.push(Mat::from_vec(ma.rows, 1, data), Op::RowDot(a, b))
    }

    /// `out = a * scale + shift` elementwise with constant vectors.
    pub fn affine(&mut self, a: Var, scale: &[f64], shift: &[f64]) -> Var {
        let ma = self.value(a);
        assert_eq!(ma.data.len(), scale.len(), "affine shape mismatch");
        let data = ma
            .data
            .iter()
            .zip(scale)
            .zip(shift)
            .map(|((x, s), b)| x * s + b)
            .collect();
        let out = Mat::from_vec(ma.rows, ma.cols, data);
        self.push(out, Op::Affine(a, scale.to_vec()))
    }

    /// Mean squared error against a constant target; a `1 x 1` result.
    pub fn mse(&mut self, pred: Var, target: &[f64]) -> Var {
        let mp = self.value(pred);
        assert_eq!(mp.data.len(), target.len(), "mse length mismatch");
        let loss = mp
            .data
            .iter()
            .zip(target)
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>()
            / target.len() as f64;
        self.push(
            Mat::from_vec(1, 1, vec![loss]),
            Op::Mse(pred, target.to_vec()),
        )
    }

    /// Gradients of the scalar `root` with respect to every node.
    pub fn backward(&self, root: Var) -> Gradients {
        let mut grads: Vec<Option<Mat>> = (0..self.nodes.len()).map(|_| None).collect();
        let mut seed = Mat::zeros(1, 1);
        seed.data[0] = 1.0;
        grads[root.0] = Some(seed);

        fn acc(grads: &mut [Option<Mat>], v: Var, like: &Mat, f: impl FnOnce(&mut Mat)) {
            let g = grads[v.0].get_or_insert_with(|| Mat::zeros(like.rows, like.cols));
            f(g);
        }

        for idx in (0..=root.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    acc(&mut grads, *a, va, |ga| gemm_a_bt_acc(&g, vb, ga));
                    acc(&mut grads, *b, vb, |gb| gemm_at_b_acc(va, &g, gb));
                }
                Op::AddRow(a, b) => {
                    acc(&mut grads, *a, &g, |ga| ga.add_assign(&g));
                    acc(&mut grads, *b, self.value(*b), |gb| {
                        for r in 0..g.rows {
                            for (o, v) in gb.data.iter_mut().zip(g.row(r)) {
                                *o += v;
                            }
                        }
                    });
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *a, &g, |ga| ga.add_assign(&g));
                    acc(&mut grads, *b, &g, |gb| gb.add_assign(&g));
                }
                Op::LeakyRelu(a, slope) => {
                    let x = self.value(*a);
                    acc(&mut grads, *a, x, |ga| {
                        for ((o, gv), xv) in ga.data.iter_mut().zip(&g.data).zip(&x.data) {
                            *o += if *xv < 0.0 { slope * gv } else { *gv };
                        }
                    });
                }
                Op::Elu(a) => {
                    let x = self.value(*a);
                    acc(&mut grads, *a, x, |ga| {
                        for ((o, gv), xv) in ga.data.iter_mut().zip(&g.data).zip(&x.data) {
                            *o += if *xv < 0.0 { gv * xv.exp() } else { *gv };
                        }
                    });
                }
                Op::Relu(a) => {
                    let x = self.value(*a);
                    acc(&mut grads, *a, x, |ga| {
                        for ((o, gv), xv) in ga.data.iter_mut().zip(&g.data).zip(&x.data) {
                            if *xv > 0.0 {
                                *o += gv;
                            }
                        }
                    });
                }
                Op::HeadDot { x, a, heads } => {
                    let (vx, va) = (self.value(*x), self.value(*a));
                    let d = va.cols;
                    let heads = *heads;
                    acc(&mut grads, *x, vx, |gx| {
                        for i in 0..vx.rows {
                            for h in 0..heads {
                                let gv = g.data[i * heads + h];
                                let row =
                                    &mut gx.data[i * vx.cols + h * d..i * vx.cols + (h + 1) * d];
                                for (o, av) in row.iter_mut().zip(va.row(h)) {
                                    *o += gv * av;
                                }
                            }
                        }
                    });
                    acc(&mut grads, *a, va, |ga| {
                        for i in 0..vx.rows {
                            for h in 0..heads {
                                let gv = g.data[i * heads + h];
                                let xs = &vx.row(i)[h * d..(h + 1) * d];
                                for (o, xv) in ga.row_mut(h).iter_mut().zip(xs) {
                                    *o += gv * xv;
                                }
                            }
                        }
                    });
                }
                Op::Gat {
                    h,
                    src,
                    dst,
                    heads,
                    slope,
                    nbrs,
                    z,
                    alpha,
                } => {
                    let vh = self.value(*h);
                    let heads = *heads;
                    let d = vh.cols / heads;
                    let mut gh = Mat::zeros(vh.rows, vh.cols);
                    let mut gsrc = Mat::zeros(vh.rows, heads);
                    let mut gdst = Mat::zeros(vh.rows, heads);
                    for (i, nb) in nbrs.iter().enumerate() {
                        for hh in 0..heads {
                            let go = &g.row(i)[hh * d..(hh + 1) * d];
                            let al = &alpha[i][hh];
                            let dalpha: Vec<f64> = nb
                                .iter()
                                .zip(al)
                                .map(|(&j, &a)| {
                                    let hj = &vh.row(j)[hh * d..(hh + 1) * d];
                                    let ghj = &mut gh.data
                                        [j * vh.cols + hh * d..j * vh.cols + (hh + 1) * d];
                                    let mut dot = 0.0;
                                    for ((o, gv), hv) in ghj.iter_mut().zip(go).zip(hj) {
                                        *o += a * gv;
                                        dot += gv * hv;
                                    }
                                    dot
                                })
                                .collect();
                            let mean: f64 = al.iter().zip(&dalpha).map(|(a, da)| a * da).sum();
                            for (m, &j) in nb.iter().enumerate() {
                                let de = al[m] * (dalpha[m] - mean);
                                let dz = if z[i][hh][m] < 0.0 { slope * de } else { de };
                                gsrc.data[j * heads + hh] += dz;
                                gdst.data[i * heads + hh] += dz;
                            }
                        }
                    }
                    acc(&mut grads, *h, vh, |o| o.add_assign(&gh));
                    acc(&mut grads, *src, &gsrc, |o| o.add_assign(&gsrc));
                    acc(&mut grads, *dst, &gdst, |o| o.add_assign(&gdst));
                }
                Op::SegmentMean(x, segments) => {
                    let vx = self.value(*x);
                    acc(&mut grads, *x, vx, |gx| {
                        for (k, seg) in segments.iter().enumerate() {
                            let inv = 1.0 / seg.len() as f64;
                            for &r in seg {
                                for (o, gv) in gx.row_mut(r).iter_mut().zip(g.row(k)) {
                                    *o += gv * inv;
                                }
                            }
                        }
                    });
                }
                Op::ConcatBroadcast(a, b) => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    acc(&mut grads, *a, va, |ga| {
                        for r in 0..va.rows {
                            for (o, gv) in ga.row_mut(r).iter_mut().zip(&g.row(r)[..va.cols]) {
                                *o += gv;
                            }
                        }
                    });
                    acc(&mut grads, *b, vb, |gb| {
                        for r in 0..va.rows {
                            for (o, gv) in gb.data.iter_mut().zip(&g.row(r)[va.cols..]) {
                                *o += gv;
                            }
                        }
                    });
                }
                Op::RowDot(a, b) => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    acc(&mut grads, *a, va, |ga| {
                        for r in 0..va.rows {
                            let gv = g.data[r];
                            for (o, bv) in ga.row_mut(r).iter_mut().zip(vb.row(r)) {
                                *o += gv * bv;
                            }
                        }
                    });
                    acc(&mut grads, *b, vb, |gb| {
                        for r in 0..va.rows {
                            let gv = g.data[r];
                            for (o, av) in gb.row_mut(r).iter_mut().zip(va.row(r)) {
                                *o += gv * av;
                            }
                        }
                    });
                }
                Op::Affine(a, scale) => {
                    acc(&mut grads, *a, &g, |ga| {
                        for ((o, gv), s) in ga.data.iter_mut().zip(&g.data).zip(scale) {
                            *o += gv * s;
                        }
                    });
                }
                Op::Mse(p, target) => {
                    let vp = self.value(*p);
                    let k = 2.0 * g.data[0] / target.len() as f64;
                    acc(&mut grads, *p, vp, |gp| {
                        for ((o, pv), t) in gp.data.iter_mut().zip(&vp.data).zip(target) {
                            *o += k * (pv - t);
                        }
                    });
                }
            }
            grads[idx] = Some(g);
        }
        Gradients { grads }
    }
}

pub struct Gradients {
    grads: Vec<Option<Mat>>,
}

impl Gradients {
    /// Gradient of `v`, or `None` when the root does not depend on it.
    pub fn get(&self, v: Var) -> Option<&Mat> {
        self.grads[v.0].as_ref()
    }
}
