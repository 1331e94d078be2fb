//! Define-by-run computation graph over 2-D tensors.
//!
//! Every value is a row-major `rows × cols` matrix; vectors are `1 × n`.
//! Operations evaluate eagerly and, when gradients are enabled, record
//! enough information on the tape for [`Graph::backward`].

use std::collections::HashMap;
use std::rc::Rc;

use rand::{Rng, RngCore};

use crate::params::{Gradients, ParamId, ParamStore};
use crate::{Scalar, TensorError};

/// Handle to a node on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op<T> {
    Constant,
    Param(ParamId),
    MatMul { a: Var, b: Var, ta: bool, tb: bool },
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    MulCol(Var, Var),
    Scale(Var, T),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceCols { a: Var, start: usize },
    GatherRows { a: Var, rows: Rc<[usize]> },
    PickCols { a: Var, cols: Rc<[usize]> },
    Transpose(Var),
    Reshape(Var),
    Softmax(Var),
    LogSoftmax(Var),
    Tanh(Var),
    Gelu(Var),
    MaskedFill { a: Var, mask: Rc<[bool]> },
    Dropout { a: Var, scale: Vec<T> },
    ReduceSum(Var),
    SumCols(Var),
    OuterAdd(Var, Var),
}

#[derive(Debug)]
struct Node<T> {
    rows: usize,
    cols: usize,
    value: Vec<T>,
    op: Op<T>,
    needs_grad: bool,
}

/// A tape of eagerly evaluated operations.
pub struct Graph<'p, T: Scalar> {
    params: &'p ParamStore<T>,
    nodes: Vec<Node<T>>,
    param_nodes: HashMap<ParamId, Var>,
    grad_enabled: bool,
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)
const GELU_A: f64 = 0.044_715;

impl<'p, T: Scalar> Graph<'p, T> {
    pub fn new(params: &'p ParamStore<T>) -> Self {
        Self {
            params,
            nodes: Vec::new(),
            param_nodes: HashMap::new(),
            grad_enabled: true,
        }
    }

    /// A graph that records no backward information. Forward results are
    /// identical to [`Graph::new`].
    pub fn no_grad(params: &'p ParamStore<T>) -> Self {
        Self {
            grad_enabled: false,
            ..Self::new(params)
        }
    }

    pub fn params(&self) -> &'p ParamStore<T> {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        let n = &self.nodes[v.0];
        (n.rows, n.cols)
    }

    pub fn value(&self, v: Var) -> &[T] {
        let n = &self.nodes[v.0];
        match n.op {
            Op::Param(id) => &self.params.entry(id).value,
            _ => &n.value,
        }
    }

    pub fn to_vec(&self, v: Var) -> Vec<T> {
        self.value(v).to_vec()
    }

    /// Value of a `1 × 1` node.
    pub fn scalar(&self, v: Var) -> T {
        self.value(v)[0]
    }

    fn push(&mut self, rows: usize, cols: usize, value: Vec<T>, op: Op<T>, inputs: &[Var]) -> Var {
        debug_assert_eq!(value.len(), rows * cols);
        let needs_grad = self.grad_enabled && inputs.iter().any(|v| self.nodes[v.0].needs_grad);
        let op = if needs_grad { op } else { Op::Constant };
        self.nodes.push(Node {
            rows,
            cols,
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, rows: usize, cols: usize, value: Vec<T>) -> Result<Var, TensorError> {
        if value.len() != rows * cols {
            return Err(TensorError::Shape(format!(
                "constant: {} values for {rows}x{cols}",
                value.len()
            )));
        }
        self.nodes.push(Node {
            rows,
            cols,
            value,
            op: Op::Constant,
            needs_grad: false,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn param(&mut self, name: &str) -> Result<Var, TensorError> {
        let id = self.params.id(name)?;
        Ok(self.param_by_id(id))
    }

    pub fn param_by_id(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_nodes.get(&id) {
            return *v;
        }
        let e = self.params.entry(id);
        self.nodes.push(Node {
            rows: e.rows,
            cols: e.cols,
            value: Vec::new(),
            op: Op::Param(id),
            needs_grad: self.grad_enabled,
        });
        let v = Var(self.nodes.len() - 1);
        self.param_nodes.insert(id, v);
        v
    }

    // ----- linear algebra -------------------------------------------------

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.matmul_t(a, false, b, false)
    }

    /// `op(a) · op(b)` where `op` transposes when the flag is set.
    pub fn matmul_t(&mut self, a: Var, ta: bool, b: Var, tb: bool) -> Result<Var, TensorError> {
        let (ar, ac) = self.shape(a);
        let (br, bc) = self.shape(b);
        let (m, k) = if ta { (ac, ar) } else { (ar, ac) };
        let (k2, n) = if tb { (bc, br) } else { (br, bc) };
        if k != k2 {
            return Err(TensorError::Shape(format!(
                "matmul: {m}x{k} by {k2}x{n}"
            )));
        }
        let mut out = vec![T::zero(); m * n];
        T::gemm(m, k, n, self.value(a), ta, self.value(b), tb, T::zero(), &mut out);
        Ok(self.push(m, n, out, Op::MatMul { a, b, ta, tb }, &[a, b]))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let (r, c) = self.shape(a);
        let src = self.value(a);
        let mut out = vec![T::zero(); r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = src[i * c + j];
            }
        }
        self.push(c, r, out, Op::Transpose(a), &[a])
    }

    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Result<Var, TensorError> {
        let (r, c) = self.shape(a);
        if r * c != rows * cols {
            return Err(TensorError::Shape(format!("reshape {r}x{c} to {rows}x{cols}")));
        }
        let out = self.to_vec(a);
        Ok(self.push(rows, cols, out, Op::Reshape(a), &[a]))
    }

    // ----- elementwise ------------------------------------------------------

    fn same_shape(&self, what: &str, a: Var, b: Var) -> Result<(usize, usize), TensorError> {
        let sa = self.shape(a);
        let sb = self.shape(b);
        if sa != sb {
            return Err(TensorError::Shape(format!("{what}: {sa:?} vs {sb:?}")));
        }
        Ok(sa)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (r, c) = self.same_shape("add", a, b)?;
        let out = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| *x + *y)
            .collect();
        Ok(self.push(r, c, out, Op::Add(a, b), &[a, b]))
    }

    /// Adds a `1 × n` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var, TensorError> {
        let (r, c) = self.shape(a);
        if self.shape(row) != (1, c) {
            return Err(TensorError::Shape(format!(
                "add_row: {r}x{c} with {:?}",
                self.shape(row)
            )));
        }
        let bias = self.value(row);
        let out = self
            .value(a)
            .iter()
            .enumerate()
            .map(|(i, x)| *x + bias[i % c])
            .collect();
        Ok(self.push(r, c, out, Op::AddRow(a, row), &[a, row]))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (r, c) = self.same_shape("mul", a, b)?;
        let out = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| *x * *y)
            .collect();
        Ok(self.push(r, c, out, Op::Mul(a, b), &[a, b]))
    }

    /// Scales row `i` of `a` by `col[i]` where `col` is `rows × 1`.
    pub fn mul_col(&mut self, a: Var, col: Var) -> Result<Var, TensorError> {
        let (r, c) = self.shape(a);
        if self.shape(col) != (r, 1) {
            return Err(TensorError::Shape(format!(
                "mul_col: {r}x{c} with {:?}",
                self.shape(col)
            )));
        }
        let s = self.value(col);
        let out = self
            .value(a)
            .iter()
            .enumerate()
            .map(|(i, x)| *x * s[i / c])
            .collect();
        Ok(self.push(r, c, out, Op::MulCol(a, col), &[a, col]))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let s = T::from_f64_lossy(s);
        let (r, c) = self.shape(a);
        let out = self.value(a).iter().map(|x| *x * s).collect();
        self.push(r, c, out, Op::Scale(a, s), &[a])
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let (r, c) = self.shape(a);
        let out = self.value(a).iter().map(|x| x.tanh()).collect();
        self.push(r, c, out, Op::Tanh(a), &[a])
    }

    /// GELU, tanh approximation.
    pub fn gelu(&mut self, a: Var) -> Var {
        let (r, c) = self.shape(a);
        let half = T::from_f64_lossy(0.5);
        let gc = T::from_f64_lossy(GELU_C);
        let ga = T::from_f64_lossy(GELU_A);
        let out = self
            .value(a)
            .iter()
            .map(|&x| half * x * (T::one() + (gc * (x + ga * x * x * x)).tanh()))
            .collect();
        self.push(r, c, out, Op::Gelu(a), &[a])
    }

    /// Replaces entries where `mask` is true by `-inf`.
    pub fn masked_fill(&mut self, a: Var, mask: Rc<[bool]>) -> Result<Var, TensorError> {
        let (r, c) = self.shape(a);
        if mask.len() != r * c {
            return Err(TensorError::Shape(format!(
                "masked_fill: mask of {} for {r}x{c}",
                mask.len()
            )));
        }
        let out = self
            .value(a)
            .iter()
            .zip(mask.iter())
            .map(|(x, m)| if *m { T::neg_infinity() } else { *x })
            .collect();
        Ok(self.push(r, c, out, Op::MaskedFill { a, mask }, &[a]))
    }

    /// Inverted dropout. Identity when `rng` is `None` or `rate == 0`.
    pub fn dropout(&mut self, a: Var, rate: f64, rng: Option<&mut dyn RngCore>) -> Var {
        let Some(rng) = rng else { return a };
        if rate <= 0.0 {
            return a;
        }
        let (r, c) = self.shape(a);
        let keep = T::from_f64_lossy(1.0 / (1.0 - rate));
        let scale: Vec<T> = (0..r * c)
            .map(|_| if rng.gen::<f64>() < rate { T::zero() } else { keep })
            .collect();
        let out = self
            .value(a)
            .iter()
            .zip(&scale)
            .map(|(x, s)| *x * *s)
            .collect();
        self.push(r, c, out, Op::Dropout { a, scale }, &[a])
    }

    // ----- structural ---------------------------------------------------------

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, TensorError> {
        let rows = parts
            .first()
            .map(|v| self.shape(*v).0)
            .ok_or_else(|| TensorError::Shape("concat_cols: no inputs".into()))?;
        if parts.iter().any(|v| self.shape(*v).0 != rows) {
            return Err(TensorError::Shape("concat_cols: row counts differ".into()));
        }
        let cols: usize = parts.iter().map(|v| self.shape(*v).1).sum();
        let mut out = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for p in parts {
                let c = self.shape(*p).1;
                out.extend_from_slice(&self.value(*p)[i * c..(i + 1) * c]);
            }
        }
        Ok(self.push(rows, cols, out, Op::ConcatCols(parts.to_vec()), parts))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var, TensorError> {
        let cols = parts
            .first()
            .map(|v| self.shape(*v).1)
            .ok_or_else(|| TensorError::Shape("concat_rows: no inputs".into()))?;
        if parts.iter().any(|v| self.shape(*v).1 != cols) {
            return Err(TensorError::Shape("concat_rows: column counts differ".into()));
        }
        let rows: usize = parts.iter().map(|v| self.shape(*v).0).sum();
        let mut out = Vec::with_capacity(rows * cols);
        for p in parts {
            out.extend_from_slice(self.value(*p));
        }
        Ok(self.push(rows, cols, out, Op::ConcatRows(parts.to_vec()), parts))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, width: usize) -> Result<Var, TensorError> {
        let (r, c) = self.shape(a);
        if start + width > c {
            return Err(TensorError::Shape(format!(
                "slice_cols {start}..{} of {c}",
                start + width
            )));
        }
        let src = self.value(a);
        let mut out = Vec::with_capacity(r * width);
        for i in 0..r {
            out.extend_from_slice(&src[i * c + start..i * c + start + width]);
        }
        Ok(self.push(r, width, out, Op::SliceCols { a, start }, &[a]))
    }

    /// Row gather; `embedding_lookup` is this op applied to a table.
    pub fn gather_rows(&mut self, a: Var, rows: &[usize]) -> Result<Var, TensorError> {
        let (r, c) = self.shape(a);
        if let Some(bad) = rows.iter().find(|&&i| i >= r) {
            return Err(TensorError::Shape(format!("gather_rows: row {bad} of {r}")));
        }
        let src = self.value(a);
        let mut out = Vec::with_capacity(rows.len() * c);
        for &i in rows {
            out.extend_from_slice(&src[i * c..(i + 1) * c]);
        }
        let rows: Rc<[usize]> = rows.into();
        let n = rows.len();
        Ok(self.push(n, c, out, Op::GatherRows { a, rows }, &[a]))
    }

    pub fn embedding_lookup(&mut self, table: Var, ids: &[usize]) -> Result<Var, TensorError> {
        self.gather_rows(table, ids)
    }

    /// `out[i] = a[i, cols[i]]`, shaped `rows × 1`.
    pub fn pick_cols(&mut self, a: Var, cols: &[usize]) -> Result<Var, TensorError> {
        let (r, c) = self.shape(a);
        if cols.len() != r || cols.iter().any(|&j| j >= c) {
            return Err(TensorError::Shape(format!("pick_cols on {r}x{c}")));
        }
        let src = self.value(a);
        let out = cols.iter().enumerate().map(|(i, &j)| src[i * c + j]).collect();
        Ok(self.push(r, 1, out, Op::PickCols { a, cols: cols.into() }, &[a]))
    }

    /// `[n × d] ⊕ [l × d] → [(n·l) × d]`, row `i·l + j` holding `a_i + b_j`.
    pub fn outer_add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (n, d) = self.shape(a);
        let (l, d2) = self.shape(b);
        if d != d2 {
            return Err(TensorError::Shape(format!("outer_add: {n}x{d} with {l}x{d2}")));
        }
        let av = self.value(a);
        let bv = self.value(b);
        let mut out = Vec::with_capacity(n * l * d);
        for i in 0..n {
            for j in 0..l {
                out.extend((0..d).map(|k| av[i * d + k] + bv[j * d + k]));
            }
        }
        Ok(self.push(n * l, d, out, Op::OuterAdd(a, b), &[a, b]))
    }

    // ----- reductions -------------------------------------------------------

    pub fn softmax(&mut self, a: Var) -> Var {
        let (r, c) = self.shape(a);
        let mut out = self.to_vec(a);
        for row in out.chunks_mut(c.max(1)) {
            softmax_in_place(row);
        }
        self.push(r, c, out, Op::Softmax(a), &[a])
    }

    pub fn log_softmax(&mut self, a: Var) -> Var {
        let (r, c) = self.shape(a);
        let mut out = self.to_vec(a);
        for row in out.chunks_mut(c.max(1)) {
            let m = row.iter().fold(T::neg_infinity(), |m, x| m.max(*x));
            if m == T::neg_infinity() {
                continue;
            }
            let lse = m + row.iter().map(|x| (*x - m).exp()).fold(T::zero(), |s, x| s + x).ln();
            row.iter_mut().for_each(|x| *x = *x - lse);
        }
        self.push(r, c, out, Op::LogSoftmax(a), &[a])
    }

    pub fn reduce_sum(&mut self, a: Var) -> Var {
        let s = self.value(a).iter().fold(T::zero(), |s, x| s + *x);
        self.push(1, 1, vec![s], Op::ReduceSum(a), &[a])
    }

    /// Per-row sums, shaped `rows × 1`.
    pub fn sum_cols(&mut self, a: Var) -> Var {
        let (r, c) = self.shape(a);
        let out = self
            .value(a)
            .chunks(c.max(1))
            .map(|row| row.iter().fold(T::zero(), |s, x| s + *x))
            .collect::<Vec<_>>();
        let out = if c == 0 { vec![T::zero(); r] } else { out };
        self.push(r, 1, out, Op::SumCols(a), &[a])
    }

    // ----- backward ---------------------------------------------------------

    /// Reverse sweep from a scalar `loss`, returning gradients for every
    /// parameter reachable from it.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>, TensorError> {
        if self.shape(loss) != (1, 1) {
            return Err(TensorError::NonScalarLoss(self.shape(loss)));
        }
        let mut grads = Gradients::zeros_like(self.params);
        if !self.nodes[loss.0].needs_grad {
            return Ok(grads);
        }
        let mut g: Vec<Option<Vec<T>>> = Vec::with_capacity(loss.0 + 1);
        g.resize_with(loss.0 + 1, || None);
        g[loss.0] = Some(vec![T::one()]);

        for idx in (0..=loss.0).rev() {
            let Some(out_grad) = g[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            self.backprop_node(node, &out_grad, &mut g, &mut grads);
        }
        Ok(grads)
    }

    fn acc<'g>(&self, g: &'g mut [Option<Vec<T>>], v: Var) -> Option<&'g mut Vec<T>> {
        let n = &self.nodes[v.0];
        if !n.needs_grad {
            return None;
        }
        let slot = &mut g[v.0];
        if slot.is_none() {
            *slot = Some(vec![T::zero(); n.rows * n.cols]);
        }
        slot.as_mut()
    }

    fn backprop_node(
        &self,
        node: &Node<T>,
        dy: &[T],
        g: &mut [Option<Vec<T>>],
        grads: &mut Gradients<T>,
    ) {
        let (rows, cols) = (node.rows, node.cols);
        match &node.op {
            Op::Constant => {}
            Op::Param(id) => grads.accumulate(*id, dy),
            Op::MatMul { a, b, ta, tb } => {
                let (a, b, ta, tb) = (*a, *b, *ta, *tb);
                let (ar, ac) = self.shape(a);
                let (m, k) = if ta { (ac, ar) } else { (ar, ac) };
                let n = cols;
                let av = self.value(a);
                let bv = self.value(b);
                if let Some(ga) = self.acc(g, a) {
                    if ta {
                        T::gemm(k, n, m, bv, tb, dy, true, T::one(), ga);
                    } else {
                        T::gemm(m, n, k, dy, false, bv, !tb, T::one(), ga);
                    }
                }
                if let Some(gb) = self.acc(g, b) {
                    if tb {
                        T::gemm(n, m, k, dy, true, av, ta, T::one(), gb);
                    } else {
                        T::gemm(k, m, n, av, !ta, dy, false, T::one(), gb);
                    }
                }
            }
            Op::Add(a, b) => {
                for v in [*a, *b] {
                    if let Some(gv) = self.acc(g, v) {
                        add_into(gv, dy);
                    }
                }
            }
            Op::AddRow(a, row) => {
                if let Some(ga) = self.acc(g, *a) {
                    add_into(ga, dy);
                }
                if let Some(gr) = self.acc(g, *row) {
                    for (i, d) in dy.iter().enumerate() {
                        gr[i % cols] = gr[i % cols] + *d;
                    }
                }
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                if let Some(ga) = self.acc(g, *a) {
                    for i in 0..dy.len() {
                        ga[i] = ga[i] + dy[i] * bv[i];
                    }
                }
                if let Some(gb) = self.acc(g, *b) {
                    for i in 0..dy.len() {
                        gb[i] = gb[i] + dy[i] * av[i];
                    }
                }
            }
            Op::MulCol(a, col) => {
                let (av, cv) = (self.value(*a), self.value(*col));
                if let Some(ga) = self.acc(g, *a) {
                    for i in 0..dy.len() {
                        ga[i] = ga[i] + dy[i] * cv[i / cols];
                    }
                }
                if let Some(gc) = self.acc(g, *col) {
                    for i in 0..dy.len() {
                        gc[i / cols] = gc[i / cols] + dy[i] * av[i];
                    }
                }
            }
            Op::Scale(a, s) => {
                if let Some(ga) = self.acc(g, *a) {
                    for i in 0..dy.len() {
                        ga[i] = ga[i] + dy[i] * *s;
                    }
                }
            }
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for p in parts {
                    let pc = self.shape(*p).1;
                    if let Some(gp) = self.acc(g, *p) {
                        for i in 0..rows {
                            for j in 0..pc {
                                gp[i * pc + j] = gp[i * pc + j] + dy[i * cols + offset + j];
                            }
                        }
                    }
                    offset += pc;
                }
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for p in parts {
                    let len = self.shape(*p).0 * cols;
                    if let Some(gp) = self.acc(g, *p) {
                        add_into(gp, &dy[offset..offset + len]);
                    }
                    offset += len;
                }
            }
            Op::SliceCols { a, start } => {
                let ac = self.shape(*a).1;
                if let Some(ga) = self.acc(g, *a) {
                    for i in 0..rows {
                        for j in 0..cols {
                            ga[i * ac + start + j] = ga[i * ac + start + j] + dy[i * cols + j];
                        }
                    }
                }
            }
            Op::GatherRows { a, rows: idx } => {
                if let Some(ga) = self.acc(g, *a) {
                    for (r, &src) in idx.iter().enumerate() {
                        for j in 0..cols {
                            ga[src * cols + j] = ga[src * cols + j] + dy[r * cols + j];
                        }
                    }
                }
            }
            Op::PickCols { a, cols: picks } => {
                let ac = self.shape(*a).1;
                if let Some(ga) = self.acc(g, *a) {
                    for (i, &j) in picks.iter().enumerate() {
                        ga[i * ac + j] = ga[i * ac + j] + dy[i];
                    }
                }
            }
            Op::Transpose(a) => {
                if let Some(ga) = self.acc(g, *a) {
                    // node is cols(a) × rows(a); dy[j][i] flows to a[i][j].
                    for i in 0..cols {
                        for j in 0..rows {
                            ga[i * rows + j] = ga[i * rows + j] + dy[j * cols + i];
                        }
                    }
                }
            }
            Op::Reshape(a) => {
                if let Some(ga) = self.acc(g, *a) {
                    add_into(ga, dy);
                }
            }
            Op::Softmax(a) => {
                let y = &node.value;
                if let Some(ga) = self.acc(g, *a) {
                    for i in 0..rows {
                        let r = i * cols..(i + 1) * cols;
                        let dot = y[r.clone()]
                            .iter()
                            .zip(&dy[r.clone()])
                            .fold(T::zero(), |s, (y, d)| s + *y * *d);
                        for j in r {
                            ga[j] = ga[j] + y[j] * (dy[j] - dot);
                        }
                    }
                }
            }
            Op::LogSoftmax(a) => {
                let y = &node.value;
                if let Some(ga) = self.acc(g, *a) {
                    for i in 0..rows {
                        let r = i * cols..(i + 1) * cols;
                        let total = dy[r.clone()].iter().fold(T::zero(), |s, d| s + *d);
                        for j in r {
                            let p = y[j].exp();
                            ga[j] = ga[j] + dy[j] - p * total;
                        }
                    }
                }
            }
            Op::Tanh(a) => {
                let y = &node.value;
                if let Some(ga) = self.acc(g, *a) {
                    for i in 0..dy.len() {
                        ga[i] = ga[i] + dy[i] * (T::one() - y[i] * y[i]);
                    }
                }
            }
            Op::Gelu(a) => {
                let x = self.value(*a);
                let half = T::from_f64_lossy(0.5);
                let gc = T::from_f64_lossy(GELU_C);
                let ga_ = T::from_f64_lossy(GELU_A);
                let three = T::from_f64_lossy(3.0);
                if let Some(ga) = self.acc(g, *a) {
                    for i in 0..dy.len() {
                        let xi = x[i];
                        let t = (gc * (xi + ga_ * xi * xi * xi)).tanh();
                        let du = gc * (T::one() + three * ga_ * xi * xi);
                        let d = half * (T::one() + t) + half * xi * (T::one() - t * t) * du;
                        ga[i] = ga[i] + dy[i] * d;
                    }
                }
            }
            Op::MaskedFill { a, mask } => {
                if let Some(ga) = self.acc(g, *a) {
                    for i in 0..dy.len() {
                        if !mask[i] {
                            ga[i] = ga[i] + dy[i];
                        }
                    }
                }
            }
            Op::Dropout { a, scale } => {
                if let Some(ga) = self.acc(g, *a) {
                    for i in 0..dy.len() {
                        ga[i] = ga[i] + dy[i] * scale[i];
                    }
                }
            }
            Op::ReduceSum(a) => {
                if let Some(ga) = self.acc(g, *a) {
                    ga.iter_mut().for_each(|x| *x = *x + dy[0]);
                }
            }
            Op::SumCols(a) => {
                let ac = self.shape(*a).1;
                if let Some(ga) = self.acc(g, *a) {
                    for (i, x) in ga.iter_mut().enumerate() {
                        *x = *x + dy[i / ac];
                    }
                }
            }
            Op::OuterAdd(a, b) => {
                let l = self.shape(*b).0;
                let d = cols;
                if let Some(ga) = self.acc(g, *a) {
                    for (r, chunk) in dy.chunks(d).enumerate() {
                        let i = r / l;
                        for k in 0..d {
                            ga[i * d + k] = ga[i * d + k] + chunk[k];
                        }
                    }
                }
                if let Some(gb) = self.acc(g, *b) {
                    for (r, chunk) in dy.chunks(d).enumerate() {
                        let j = r % l;
                        for k in 0..d {
                            gb[j * d + k] = gb[j * d + k] + chunk[k];
                        }
                    }
                }
            }
        }
    }
}

fn add_into<T: Scalar>(dst: &mut [T], src: &[T]) {
    dst.iter_mut().zip(src).for_each(|(a, b)| *a = *a + *b);
}

/// Numerically stable softmax of one row. A row that is entirely `-inf`
/// becomes all zeros rather than NaN.
pub fn softmax_in_place<T: Scalar>(row: &mut [T]) {
    let m = row.iter().fold(T::neg_infinity(), |m, x| m.max(*x));
    if m == T::neg_infinity() {
        row.iter_mut().for_each(|x| *x = T::zero());
        return;
    }
    let mut sum = T::zero();
    for x in row.iter_mut() {
        *x = (*x - m).exp();
        sum = sum + *x;
    }
    row.iter_mut().for_each(|x| *x = *x / sum);
}
