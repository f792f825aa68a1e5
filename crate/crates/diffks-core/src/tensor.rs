//! Minimal reverse-mode autodiff over dense f64 tensors.
//!
//! Tensors are reference-counted graph nodes: ops record their inputs and a
//! backward closure, `backward()` on a scalar root replays the graph in
//! reverse topological order and accumulates gradients additively. There is
//! no broadcasting; shapes must match exactly and violations panic with the
//! offending op named. Graphs are single-threaded by design.

use std::cell::{Ref, RefCell};
use std::collections::HashSet;
use std::rc::Rc;

/// Backward rule: receives the node's parents and the upstream gradient and
/// accumulates into the parents. Closures hold only plain saved data (masks,
/// probabilities), never tensors, so dropping a graph cannot recurse through
/// captures.
type BackwardFn = Box<dyn Fn(&[Tensor], &[f64])>;

struct Inner {
    shape: Vec<usize>,
    values: RefCell<Vec<f64>>,
    grad: RefCell<Option<Vec<f64>>>,
    requires_grad: bool,
    parents: RefCell<Vec<Tensor>>,
    backward: Option<BackwardFn>,
}

impl Drop for Inner {
    // Long op chains (one node per recurrence step) would blow the stack if
    // dropped recursively; unlink parents iteratively instead.
    fn drop(&mut self) {
        let mut stack: Vec<Tensor> = std::mem::take(self.parents.get_mut());
        while let Some(t) = stack.pop() {
            if Rc::strong_count(&t.inner) == 1 {
                stack.append(&mut t.inner.parents.borrow_mut());
            }
        }
    }
}

/// A node in the computation graph. Cloning is cheap (shared storage).
#[derive(Clone)]
pub struct Tensor {
    inner: Rc<Inner>,
}

fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

/// Dot product with four accumulators: fast and with a fixed summation order,
/// so repeated runs are bit-identical.
#[inline]
pub(crate) fn dot_slices(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len();
    let chunks = n / 4;
    let (mut s0, mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0, 0.0);
    for c in 0..chunks {
        let i = c * 4;
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    let mut s = (s0 + s1) + (s2 + s3);
    for i in chunks * 4..n {
        s += a[i] * b[i];
    }
    s
}

impl Tensor {
    fn leaf(values: Vec<f64>, shape: Vec<usize>, requires_grad: bool) -> Tensor {
        assert_eq!(
            values.len(),
            numel(&shape),
            "tensor: {} values do not fill shape {:?}",
            values.len(),
            shape
        );
        Tensor {
            inner: Rc::new(Inner {
                shape,
                values: RefCell::new(values),
                grad: RefCell::new(None),
                requires_grad,
                parents: RefCell::new(Vec::new()),
                backward: None,
            }),
        }
    }

    fn from_op(values: Vec<f64>, shape: Vec<usize>, parents: Vec<Tensor>, backward: BackwardFn) -> Tensor {
        let requires_grad = parents.iter().any(|p| p.requires_grad());
        if !requires_grad {
            return Tensor::leaf(values, shape, false);
        }
        Tensor {
            inner: Rc::new(Inner {
                shape,
                values: RefCell::new(values),
                grad: RefCell::new(None),
                requires_grad: true,
                parents: RefCell::new(parents),
                backward: Some(backward),
            }),
        }
    }

    /// Constant tensor (no gradient).
    pub fn constant(values: Vec<f64>, shape: &[usize]) -> Tensor {
        Tensor::leaf(values, shape.to_vec(), false)
    }

    /// Trainable leaf: participates in backward().
    pub fn param(values: Vec<f64>, shape: &[usize]) -> Tensor {
        Tensor::leaf(values, shape.to_vec(), true)
    }

    pub fn scalar(v: f64) -> Tensor {
        Tensor::leaf(vec![v], vec![1], false)
    }

    pub fn zeros(shape: &[usize]) -> Tensor {
        Tensor::leaf(vec![0.0; numel(shape)], shape.to_vec(), false)
    }

    pub fn ones(shape: &[usize]) -> Tensor {
        Tensor::leaf(vec![1.0; numel(shape)], shape.to_vec(), false)
    }

    pub fn shape(&self) -> &[usize] {
        &self.inner.shape
    }

    pub fn len(&self) -> usize {
        numel(&self.inner.shape)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn requires_grad(&self) -> bool {
        self.inner.requires_grad
    }

    pub fn values(&self) -> Ref<'_, Vec<f64>> {
        self.inner.values.borrow()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.inner.values.borrow().clone()
    }

    /// Scalar value; panics unless the tensor has exactly one element.
    pub fn value(&self) -> f64 {
        let v = self.inner.values.borrow();
        assert_eq!(v.len(), 1, "value() on non-scalar tensor of shape {:?}", self.shape());
        v[0]
    }

    /// Overwrite stored values in place (used by the optimizer and by
    /// finite-difference perturbation). Length must be unchanged.
    pub fn set_values(&self, values: &[f64]) {
        let mut v = self.inner.values.borrow_mut();
        assert_eq!(v.len(), values.len(), "set_values: length mismatch");
        v.copy_from_slice(values);
    }

    /// In-place update of one coordinate, for perturbation-style probing.
    pub fn nudge(&self, index: usize, delta: f64) {
        self.inner.values.borrow_mut()[index] += delta;
    }

    pub fn grad(&self) -> Option<Vec<f64>> {
        self.inner.grad.borrow().clone()
    }

    pub fn zero_grad(&self) {
        *self.inner.grad.borrow_mut() = None;
    }

    /// Install a gradient buffer directly (optimizer plumbing and tests).
    pub fn set_grad(&self, grad: Vec<f64>) {
        assert_eq!(grad.len(), self.len(), "set_grad: length mismatch");
        *self.inner.grad.borrow_mut() = Some(grad);
    }

    fn accumulate(&self, delta: &[f64]) {
        if !self.inner.requires_grad {
            return;
        }
        let mut g = self.inner.grad.borrow_mut();
        match g.as_mut() {
            Some(buf) => {
                for (b, d) in buf.iter_mut().zip(delta) {
                    *b += d;
                }
            }
            None => *g = Some(delta.to_vec()),
        }
    }

    /// Reverse pass from a scalar root. Gradients accumulate additively, so
    /// callers zero parameter grads between optimizer steps.
    pub fn backward(&self) {
        assert_eq!(self.len(), 1, "backward() requires a scalar root, got shape {:?}", self.shape());
        // Iterative post-order DFS: avoids stack overflow on long recurrences.
        enum Visit {
            Enter(Tensor),
            Exit(Tensor),
        }
        let mut order: Vec<Tensor> = Vec::new();
        let mut seen: HashSet<*const Inner> = HashSet::new();
        let mut stack = vec![Visit::Enter(self.clone())];
        while let Some(v) = stack.pop() {
            match v {
                Visit::Enter(t) => {
                    let key = Rc::as_ptr(&t.inner);
                    if !seen.insert(key) {
                        continue;
                    }
                    stack.push(Visit::Exit(t.clone()));
                    for p in t.inner.parents.borrow().iter() {
                        if !seen.contains(&Rc::as_ptr(&p.inner)) {
                            stack.push(Visit::Enter(p.clone()));
                        }
                    }
                }
                Visit::Exit(t) => order.push(t),
            }
        }
        self.accumulate(&[1.0]);
        for t in order.iter().rev() {
            if let Some(f) = &t.inner.backward {
                let g = t.inner.grad.borrow();
                if let Some(g) = g.as_ref() {
                    f(&t.inner.parents.borrow(), g);
                }
            }
        }
    }

    // ---- ops ----

    /// Matrix product [m,k] x [k,n] -> [m,n].
    pub fn matmul(&self, rhs: &Tensor) -> Tensor {
        let (a, b) = (self.shape(), rhs.shape());
        assert!(
            a.len() == 2 && b.len() == 2 && a[1] == b[0],
            "matmul: incompatible shapes {:?} x {:?}",
            a,
            b
        );
        let (m, k, n) = (a[0], a[1], b[1]);
        let mut out = vec![0.0; m * n];
        {
            let av = self.values();
            let bv = rhs.values();
            for i in 0..m {
                for l in 0..k {
                    let x = av[i * k + l];
                    if x != 0.0 {
                        let brow = &bv[l * n..(l + 1) * n];
                        let orow = &mut out[i * n..(i + 1) * n];
                        for j in 0..n {
                            orow[j] += x * brow[j];
                        }
                    }
                }
            }
        }
        Tensor::from_op(
            out,
            vec![m, n],
            vec![self.clone(), rhs.clone()],
            Box::new(move |ps, g| {
                let av = ps[0].values();
                let bv = ps[1].values();
                // dA = dC . B^T
                let mut da = vec![0.0; m * k];
                for i in 0..m {
                    for l in 0..k {
                        da[i * k + l] = dot_slices(&g[i * n..(i + 1) * n], &bv[l * n..(l + 1) * n]);
                    }
                }
                // dB = A^T . dC
                let mut db = vec![0.0; k * n];
                for l in 0..k {
                    for i in 0..m {
                        let x = av[i * k + l];
                        if x != 0.0 {
                            let grow = &g[i * n..(i + 1) * n];
                            let drow = &mut db[l * n..(l + 1) * n];
                            for j in 0..n {
                                drow[j] += x * grow[j];
                            }
                        }
                    }
                }
                drop(av);
                drop(bv);
                ps[0].accumulate(&da);
                ps[1].accumulate(&db);
            }),
        )
    }

    /// Matrix-vector product [m,n] x [n] -> [m].
    pub fn matvec(&self, x: &Tensor) -> Tensor {
        let (a, b) = (self.shape(), x.shape());
        assert!(
            a.len() == 2 && b.len() == 1 && a[1] == b[0],
            "matvec: incompatible shapes {:?} x {:?}",
            a,
            b
        );
        let (m, n) = (a[0], a[1]);
        let mut out = vec![0.0; m];
        {
            let wv = self.values();
            let xv = x.values();
            for i in 0..m {
                out[i] = dot_slices(&wv[i * n..(i + 1) * n], &xv);
            }
        }
        Tensor::from_op(
            out,
            vec![m],
            vec![self.clone(), x.clone()],
            Box::new(move |ps, g| {
                let wv = ps[0].values();
                let xv = ps[1].values();
                let mut dw = vec![0.0; m * n];
                let mut dx = vec![0.0; n];
                for i in 0..m {
                    let gi = g[i];
                    if gi != 0.0 {
                        let wrow = &wv[i * n..(i + 1) * n];
                        let drow = &mut dw[i * n..(i + 1) * n];
                        for j in 0..n {
                            drow[j] = gi * xv[j];
                            dx[j] += gi * wrow[j];
                        }
                    }
                }
                drop(wv);
                drop(xv);
                ps[0].accumulate(&dw);
                ps[1].accumulate(&dx);
            }),
        )
    }

    /// Inner product of two equal-length vectors -> scalar.
    pub fn dot(&self, other: &Tensor) -> Tensor {
        assert!(
            self.shape().len() == 1 && self.shape() == other.shape(),
            "dot: incompatible shapes {:?} . {:?}",
            self.shape(),
            other.shape()
        );
        let v = dot_slices(&self.values(), &other.values());
        Tensor::from_op(
            vec![v],
            vec![1],
            vec![self.clone(), other.clone()],
            Box::new(move |ps, g| {
                let s = g[0];
                let da: Vec<f64> = ps[1].values().iter().map(|x| s * x).collect();
                let db: Vec<f64> = ps[0].values().iter().map(|x| s * x).collect();
                ps[0].accumulate(&da);
                ps[1].accumulate(&db);
            }),
        )
    }

    fn binary(&self, other: &Tensor, name: &str, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        assert_eq!(
            self.shape(),
            other.shape(),
            "{}: shape mismatch {:?} vs {:?}",
            name,
            self.shape(),
            other.shape()
        );
        self.values().iter().zip(other.values().iter()).map(|(&a, &b)| f(a, b)).collect()
    }

    pub fn add(&self, other: &Tensor) -> Tensor {
        let out = self.binary(other, "add", |a, b| a + b);
        Tensor::from_op(
            out,
            self.shape().to_vec(),
            vec![self.clone(), other.clone()],
            Box::new(move |ps, g| {
                ps[0].accumulate(g);
                ps[1].accumulate(g);
            }),
        )
    }

    pub fn sub(&self, other: &Tensor) -> Tensor {
        let out = self.binary(other, "sub", |a, b| a - b);
        Tensor::from_op(
            out,
            self.shape().to_vec(),
            vec![self.clone(), other.clone()],
            Box::new(move |ps, g| {
                ps[0].accumulate(g);
                let neg: Vec<f64> = g.iter().map(|x| -x).collect();
                ps[1].accumulate(&neg);
            }),
        )
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&self, other: &Tensor) -> Tensor {
        let out = self.binary(other, "mul", |a, b| a * b);
        Tensor::from_op(
            out,
            self.shape().to_vec(),
            vec![self.clone(), other.clone()],
            Box::new(move |ps, g| {
                let da: Vec<f64> = g.iter().zip(ps[1].values().iter()).map(|(g, x)| g * x).collect();
                let db: Vec<f64> = g.iter().zip(ps[0].values().iter()).map(|(g, x)| g * x).collect();
                ps[0].accumulate(&da);
                ps[1].accumulate(&db);
            }),
        )
    }

    pub fn tanh(&self) -> Tensor {
        let out: Vec<f64> = self.values().iter().map(|x| x.tanh()).collect();
        let y = out.clone();
        Tensor::from_op(
            out,
            self.shape().to_vec(),
            vec![self.clone()],
            Box::new(move |ps, g| {
                let dx: Vec<f64> = g.iter().zip(y.iter()).map(|(g, y)| g * (1.0 - y * y)).collect();
                ps[0].accumulate(&dx);
            }),
        )
    }

    pub fn sigmoid(&self) -> Tensor {
        let out: Vec<f64> = self.values().iter().map(|x| 1.0 / (1.0 + (-x).exp())).collect();
        let y = out.clone();
        Tensor::from_op(
            out,
            self.shape().to_vec(),
            vec![self.clone()],
            Box::new(move |ps, g| {
                let dx: Vec<f64> = g.iter().zip(y.iter()).map(|(g, y)| g * y * (1.0 - y)).collect();
                ps[0].accumulate(&dx);
            }),
        )
    }

    pub fn exp(&self) -> Tensor {
        let out: Vec<f64> = self.values().iter().map(|x| x.exp()).collect();
        let y = out.clone();
        Tensor::from_op(
            out,
            self.shape().to_vec(),
            vec![self.clone()],
            Box::new(move |ps, g| {
                let dx: Vec<f64> = g.iter().zip(y.iter()).map(|(g, y)| g * y).collect();
                ps[0].accumulate(&dx);
            }),
        )
    }

    /// Natural log; panics on non-positive inputs.
    pub fn log(&self) -> Tensor {
        let out: Vec<f64> = self
            .values()
            .iter()
            .map(|&x| {
                assert!(x > 0.0, "log: non-positive input {x}");
                x.ln()
            })
            .collect();
        Tensor::from_op(
            out,
            self.shape().to_vec(),
            vec![self.clone()],
            Box::new(move |ps, g| {
                let dx: Vec<f64> = g.iter().zip(ps[0].values().iter()).map(|(g, x)| g / x).collect();
                ps[0].accumulate(&dx);
            }),
        )
    }

    /// Multiply by a plain constant.
    pub fn scale(&self, c: f64) -> Tensor {
        let out: Vec<f64> = self.values().iter().map(|x| c * x).collect();
        Tensor::from_op(
            out,
            self.shape().to_vec(),
            vec![self.clone()],
            Box::new(move |ps, g| {
                let dx: Vec<f64> = g.iter().map(|g| c * g).collect();
                ps[0].accumulate(&dx);
            }),
        )
    }

    /// Sum of all elements -> scalar.
    pub fn sum(&self) -> Tensor {
        let n = self.len();
        let s = {
            let v = self.values();
            let mut acc = 0.0;
            for x in v.iter() {
                acc += x;
            }
            acc
        };
        Tensor::from_op(
            vec![s],
            vec![1],
            vec![self.clone()],
            Box::new(move |ps, g| {
                let dx = vec![g[0]; n];
                ps[0].accumulate(&dx);
            }),
        )
    }

    /// Extract one element of a vector as a scalar tensor.
    pub fn pick(&self, index: usize) -> Tensor {
        assert_eq!(self.shape().len(), 1, "pick: expects a vector");
        let n = self.len();
        assert!(index < n, "pick: index {index} out of range {n}");
        let v = self.values()[index];
        Tensor::from_op(
            vec![v],
            vec![1],
            vec![self.clone()],
            Box::new(move |ps, g| {
                let mut dx = vec![0.0; n];
                dx[index] = g[0];
                ps[0].accumulate(&dx);
            }),
        )
    }

    /// Row of a matrix as a vector (embedding lookup).
    pub fn row(&self, index: usize) -> Tensor {
        assert_eq!(self.shape().len(), 2, "row: expects a matrix");
        let (r, c) = (self.shape()[0], self.shape()[1]);
        assert!(index < r, "row: index {index} out of range {r}");
        let out = self.values()[index * c..(index + 1) * c].to_vec();
        Tensor::from_op(
            out,
            vec![c],
            vec![self.clone()],
            Box::new(move |ps, g| {
                let mut dx = vec![0.0; r * c];
                dx[index * c..(index + 1) * c].copy_from_slice(g);
                ps[0].accumulate(&dx);
            }),
        )
    }
}

impl std::fmt::Debug for Tensor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.shape())
            .field("values", &self.to_vec())
            .field("requires_grad", &self.requires_grad())
            .finish()
    }
}

/// Concatenate along `axis`. Rank 1 (axis 0) and rank 2 (axis 0 or 1).
pub fn concat(parts: &[Tensor], axis: usize) -> Tensor {
    assert!(!parts.is_empty(), "concat: empty input");
    let rank = parts[0].shape().len();
    assert!((1..=2).contains(&rank) && axis < rank, "concat: rank {rank}, axis {axis} unsupported");
    for p in parts {
        assert_eq!(p.shape().len(), rank, "concat: mixed ranks");
        for d in 0..rank {
            if d != axis {
                assert_eq!(p.shape()[d], parts[0].shape()[d], "concat: non-axis dims differ");
            }
        }
    }
    if rank == 1 || axis == 0 {
        // Contiguous: vectors, or row-stacked matrices.
        let mut out = Vec::new();
        let mut offsets = Vec::with_capacity(parts.len());
        for p in parts {
            offsets.push((out.len(), p.len()));
            out.extend_from_slice(&p.values());
        }
        let shape = if rank == 1 {
            vec![out.len()]
        } else {
            vec![parts.iter().map(|p| p.shape()[0]).sum(), parts[0].shape()[1]]
        };
        return Tensor::from_op(
            out,
            shape,
            parts.to_vec(),
            Box::new(move |ps, g| {
                for (p, &(off, len)) in ps.iter().zip(offsets.iter()) {
                    p.accumulate(&g[off..off + len]);
                }
            }),
        );
    }
    // rank 2, axis 1: concatenate columns.
    let rows = parts[0].shape()[0];
    let widths: Vec<usize> = parts.iter().map(|p| p.shape()[1]).collect();
    let total: usize = widths.iter().sum();
    let mut out = vec![0.0; rows * total];
    {
        let mut col = 0;
        for (p, &w) in parts.iter().zip(widths.iter()) {
            let pv = p.values();
            for r in 0..rows {
                out[r * total + col..r * total + col + w].copy_from_slice(&pv[r * w..(r + 1) * w]);
            }
            col += w;
        }
    }
    Tensor::from_op(
        out,
        vec![rows, total],
        parts.to_vec(),
        Box::new(move |ps, g| {
            let mut col = 0;
            for (p, &w) in ps.iter().zip(widths.iter()) {
                let mut dp = vec![0.0; rows * w];
                for r in 0..rows {
                    dp[r * w..(r + 1) * w].copy_from_slice(&g[r * total + col..r * total + col + w]);
                }
                p.accumulate(&dp);
                col += w;
            }
        }),
    )
}

/// Softmax over a score vector with some positions excluded. Excluded
/// positions get exactly zero probability and receive no gradient. `valid`
/// marks the positions that participate; at least one must be set.
pub fn masked_softmax(scores: &Tensor, valid: &[bool]) -> Tensor {
    assert_eq!(scores.shape().len(), 1, "masked_softmax: expects a vector");
    assert_eq!(scores.len(), valid.len(), "masked_softmax: mask length mismatch");
    assert!(valid.iter().any(|&v| v), "masked_softmax: all positions masked");
    let mut out = vec![0.0; scores.len()];
    {
        let sv = scores.values();
        let mut m = f64::NEG_INFINITY;
        for (x, &ok) in sv.iter().zip(valid) {
            if ok && *x > m {
                m = *x;
            }
        }
        let mut z = 0.0;
        for (i, (&x, &ok)) in sv.iter().zip(valid).enumerate() {
            if ok {
                let e = (x - m).exp();
                out[i] = e;
                z += e;
            }
        }
        for o in out.iter_mut() {
            *o /= z;
        }
    }
    let probs = out.clone();
    let mask = valid.to_vec();
    Tensor::from_op(
        out,
        scores.shape().to_vec(),
        vec![scores.clone()],
        Box::new(move |ps, g| {
            let s = dot_slices(g, &probs);
            let dx: Vec<f64> = probs
                .iter()
                .zip(g.iter())
                .zip(mask.iter())
                .map(|((&p, &g), &ok)| if ok { p * (g - s) } else { 0.0 })
                .collect();
            ps[0].accumulate(&dx);
        }),
    )
}

/// Inverted dropout: in training each element survives with probability
/// `1 - rate` and is scaled by `1/(1-rate)`; inference is the identity.
pub fn dropout<R: rand::Rng>(x: &Tensor, rate: f64, training: bool, rng: &mut R) -> Tensor {
    assert!((0.0..1.0).contains(&rate), "dropout: rate {rate} outside [0,1)");
    if !training || rate == 0.0 {
        return x.clone();
    }
    let keep = 1.0 - rate;
    let scale = 1.0 / keep;
    let mask: Vec<f64> = (0..x.len())
        .map(|_| if rng.random::<f64>() < keep { scale } else { 0.0 })
        .collect();
    let out: Vec<f64> = x.values().iter().zip(mask.iter()).map(|(v, m)| v * m).collect();
    Tensor::from_op(
        out,
        x.shape().to_vec(),
        vec![x.clone()],
        Box::new(move |ps, g| {
            let dx: Vec<f64> = g.iter().zip(mask.iter()).map(|(g, m)| g * m).collect();
            ps[0].accumulate(&dx);
        }),
    )
}

/// Output distribution combining generation scores over the vocabulary with
/// copy scores over the tokens of one sentence:
///
///   P(w) = (exp(phi_g[w]) + [w occurs] exp(phi_c[w])) / Z
///
/// where phi_c[w] is the *sum* of per-occurrence copy scores of w. Both
/// exponent sets share one max subtraction so the raw double-exponential
/// cannot overflow. `token_ids[j]` is the vocabulary id scored by
/// `copy_scores[j]`.
pub fn copy_softmax(phi_g: &Tensor, copy_scores: &Tensor, token_ids: &[usize]) -> Tensor {
    assert_eq!(phi_g.shape().len(), 1, "copy_softmax: phi_g must be a vector");
    assert_eq!(copy_scores.len(), token_ids.len(), "copy_softmax: one score per token");
    let vocab = phi_g.len();
    // Distinct words in first-occurrence order, with summed scores.
    let mut word_of: Vec<usize> = Vec::with_capacity(token_ids.len());
    let mut words: Vec<usize> = Vec::new();
    let mut psi: Vec<f64> = Vec::new();
    {
        let q = copy_scores.values();
        for (j, &tok) in token_ids.iter().enumerate() {
            assert!(tok < vocab, "copy_softmax: token id {tok} outside vocab {vocab}");
            match words.iter().position(|&w| w == tok) {
                Some(k) => {
                    psi[k] += q[j];
                    word_of.push(k);
                }
                None => {
                    words.push(tok);
                    psi.push(q[j]);
                    word_of.push(words.len() - 1);
                }
            }
        }
    }
    let mut pg: Vec<f64>;
    let pc: Vec<f64>;
    {
        let gv = phi_g.values();
        let mut m = f64::NEG_INFINITY;
        for &x in gv.iter().chain(psi.iter()) {
            if x > m {
                m = x;
            }
        }
        let eg: Vec<f64> = gv.iter().map(|&x| (x - m).exp()).collect();
        let ec: Vec<f64> = psi.iter().map(|&x| (x - m).exp()).collect();
        let z: f64 = eg.iter().sum::<f64>() + ec.iter().sum::<f64>();
        pg = eg;
        for e in pg.iter_mut() {
            *e /= z;
        }
        pc = ec.iter().map(|&e| e / z).collect();
    }
    let mut out = pg.clone();
    for (k, &w) in words.iter().enumerate() {
        out[w] += pc[k];
    }
    Tensor::from_op(
        out,
        vec![vocab],
        vec![phi_g.clone(), copy_scores.clone()],
        Box::new(move |ps, g| {
            // s = sum_w g_w P_w, split over the two additive parts.
            let mut s = dot_slices(g, &pg);
            for (k, &w) in words.iter().enumerate() {
                s += g[w] * pc[k];
            }
            let dg: Vec<f64> = pg.iter().zip(g.iter()).map(|(&p, &gw)| p * (gw - s)).collect();
            let dq: Vec<f64> = word_of.iter().map(|&k| pc[k] * (g[words[k]] - s)).collect();
            ps[0].accumulate(&dg);
            ps[1].accumulate(&dq);
        }),
    )
}
