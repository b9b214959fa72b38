//! Stochastic MNA assembly: `d q(x, ξ)/dt + f(x, ξ) = B·u(t)`.
//!
//! The state holds the non-ground node voltages in order of first appearance,
//! then inductor currents, then voltage-source currents. `f` counts currents
//! leaving a node. A current source drives current from its `+` node through
//! itself into its `−` node.

pub mod devices;
pub mod netlist;
pub mod units;
pub mod waveform;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::basis::{Distribution, RandomParameter};
pub use netlist::{
    parse_netlist, AnalysisSpec, DeviceCard, DeviceKind, Diagnostic, Netlist, ParamValue, ParseError,
    SourceSpec,
};
pub use waveform::Waveform;

#[derive(Debug, Error)]
pub enum CircuitError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("netlist has no devices")]
    Empty,
    #[error("device {device}: {message}")]
    Device { device: String, message: String },
    /// A model produced a non-finite value; Newton should shorten its step.
    #[error("device {device} overflowed during evaluation")]
    Overflow { device: String },
    #[error("expected {expected} entries, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Constant or germ-driven parameter.
#[derive(Debug, Clone, Copy)]
enum Param {
    Const(f64),
    Random(usize),
}

impl Param {
    #[inline]
    fn at(self, params: &[RandomParameter], xi: &[f64]) -> f64 {
        match self {
            Param::Const(v) => v,
            Param::Random(i) => params[i].physical(xi[i]),
        }
    }
}

type Node = Option<usize>;

#[derive(Debug, Clone)]
enum Element {
    Resistor { a: Node, b: Node, r: Param },
    Capacitor { a: Node, b: Node, c: Param },
    Inductor { a: Node, b: Node, k: usize, l: Param },
    VSource { a: Node, b: Node, k: usize },
    ISource,
    Diode { a: Node, k: Node, is: Param, n: Param, temp: Param, cj: Param },
    Mosfet {
        d: Node,
        g: Node,
        s: Node,
        sign: f64,
        kp: Param,
        w: Param,
        l: Param,
        vt: Param,
        lambda: Param,
        tcv: Param,
        temp: Param,
        cgs: Param,
        cgd: Param,
    },
    Bjt {
        c: Node,
        b: Node,
        e: Node,
        sign: f64,
        is: Param,
        bf: Param,
        br: Param,
        temp: Param,
        cbe: Param,
        cbc: Param,
    },
}

#[derive(Debug, Clone)]
pub struct Source {
    pub name: String,
    pub waveform: Waveform,
    pub ac: Complex64,
    /// Nonzero entries `(row, coefficient)` of this source's column of `B`.
    pub column: Vec<(usize, f64)>,
}

/// Values and Jacobians of `q` and `f` at one `(x, ξ)`.
#[derive(Debug, Clone)]
pub struct QfEval {
    pub q: DVector<f64>,
    pub f: DVector<f64>,
    pub dq: DMatrix<f64>,
    pub df: DMatrix<f64>,
}

impl QfEval {
    pub fn zeros(n: usize) -> Self {
        QfEval {
            q: DVector::zeros(n),
            f: DVector::zeros(n),
            dq: DMatrix::zeros(n, n),
            df: DMatrix::zeros(n, n),
        }
    }

    fn clear(&mut self) {
        self.q.fill(0.0);
        self.f.fill(0.0);
        self.dq.fill(0.0);
        self.df.fill(0.0);
    }
}

/// Adds the contribution of a current `i` flowing from `a` to `b` that depends
/// on the listed node voltages.
#[inline]
fn stamp_current(vec: &mut DVector<f64>, jac: &mut DMatrix<f64>, a: Node, b: Node, i: f64, grads: &[(Node, f64)]) {
    if let Some(a) = a {
        vec[a] += i;
        for &(n, g) in grads {
            if let Some(n) = n {
                jac[(a, n)] += g;
            }
        }
    }
    if let Some(b) = b {
        vec[b] -= i;
        for &(n, g) in grads {
            if let Some(n) = n {
                jac[(b, n)] -= g;
            }
        }
    }
}

/// Linear two-terminal branch `i = g·(va − vb)`.
#[inline]
fn stamp_linear(vec: &mut DVector<f64>, jac: &mut DMatrix<f64>, x: &[f64], a: Node, b: Node, g: f64) {
    let v = volt(x, a) - volt(x, b);
    stamp_current(vec, jac, a, b, g * v, &[(a, g), (b, -g)]);
}

#[inline]
fn volt(x: &[f64], n: Node) -> f64 {
    n.map_or(0.0, |i| x[i])
}

#[derive(Debug, Clone, Serialize)]
pub struct StateInfo {
    pub names: Vec<String>,
    pub nodes: usize,
    pub inductors: usize,
    pub vsources: usize,
}

#[derive(Debug, Clone)]
pub struct StochasticCircuit {
    pub title: Option<String>,
    state: StateInfo,
    params: Vec<RandomParameter>,
    elements: Vec<Element>,
    element_names: Vec<String>,
    sources: Vec<Source>,
    analyses: Vec<AnalysisSpec>,
    warnings: Vec<String>,
}

fn is_ground(name: &str) -> bool {
    name == "0" || name == "gnd"
}

impl StochasticCircuit {
    pub fn from_text(text: &str) -> Result<Self, CircuitError> {
        Self::assemble(&parse_netlist(text)?)
    }

    pub fn assemble(net: &Netlist) -> Result<Self, CircuitError> {
        if net.devices.is_empty() {
            return Err(CircuitError::Empty);
        }
        let mut node_names: Vec<String> = Vec::new();
        for d in &net.devices {
            for n in &d.nodes {
                if !is_ground(n) && !node_names.contains(n) {
                    node_names.push(n.clone());
                }
            }
        }
        let node = |name: &str| -> Node {
            if is_ground(name) {
                None
            } else {
                node_names.iter().position(|n| n == name)
            }
        };
        let n_nodes = node_names.len();
        let inductors: Vec<&DeviceCard> =
            net.devices.iter().filter(|d| d.kind == DeviceKind::Inductor).collect();
        let vsources: Vec<&DeviceCard> =
            net.devices.iter().filter(|d| d.kind == DeviceKind::VoltageSource).collect();
        let mut names: Vec<String> = node_names.iter().map(|n| format!("v({n})")).collect();
        names.extend(inductors.iter().map(|d| format!("i({})", d.name)));
        names.extend(vsources.iter().map(|d| format!("i({})", d.name)));
        let branch_of = |name: &str| -> usize {
            if let Some(i) = inductors.iter().position(|d| d.name == name) {
                n_nodes + i
            } else {
                n_nodes + inductors.len() + vsources.iter().position(|d| d.name == name).unwrap()
            }
        };

        let conv = |v: ParamValue| match v {
            ParamValue::Const(c) => Param::Const(c),
            ParamValue::Random(i) => Param::Random(i),
        };
        let opt = |d: &DeviceCard, key: &str, default: f64| d.option(key).map_or(Param::Const(default), conv);

        let mut elements = Vec::new();
        let mut element_names = Vec::new();
        let mut sources = Vec::new();
        for d in &net.devices {
            let t: Vec<Node> = d.nodes.iter().map(|n| node(n)).collect();
            let value = || {
                d.value.map(conv).ok_or_else(|| CircuitError::Device {
                    device: d.name.clone(),
                    message: "missing value".into(),
                })
            };
            let el = match d.kind {
                DeviceKind::Resistor => Element::Resistor { a: t[0], b: t[1], r: value()? },
                DeviceKind::Capacitor => Element::Capacitor { a: t[0], b: t[1], c: value()? },
                DeviceKind::Inductor => Element::Inductor {
                    a: t[0],
                    b: t[1],
                    k: branch_of(&d.name),
                    l: value()?,
                },
                DeviceKind::VoltageSource | DeviceKind::CurrentSource => {
                    let spec = d.source.clone().unwrap_or(SourceSpec {
                        waveform: Waveform::Dc(0.0),
                        ac: None,
                    });
                    let ac = spec
                        .ac
                        .map_or(Complex64::new(0.0, 0.0), |(m, ph)| Complex64::from_polar(m, ph.to_radians()));
                    let (el, column) = if d.kind == DeviceKind::VoltageSource {
                        let k = branch_of(&d.name);
                        (Element::VSource { a: t[0], b: t[1], k }, vec![(k, 1.0)])
                    } else {
                        let mut col = Vec::new();
                        if let Some(a) = t[0] {
                            col.push((a, -1.0));
                        }
                        if let Some(b) = t[1] {
                            col.push((b, 1.0));
                        }
                        (Element::ISource, col)
                    };
                    sources.push(Source {
                        name: d.name.clone(),
                        waveform: spec.waveform,
                        ac,
                        column,
                    });
                    el
                }
                DeviceKind::Diode => Element::Diode {
                    a: t[0],
                    k: t[1],
                    is: opt(d, "is", 1e-14),
                    n: opt(d, "n", 1.0),
                    temp: opt(d, "temp", devices::TNOM_CELSIUS),
                    cj: opt(d, "cj", 0.0),
                },
                DeviceKind::Mosfet { pmos } => {
                    let sign = if pmos { -1.0 } else { 1.0 };
                    Element::Mosfet {
                        d: t[0],
                        g: t[1],
                        s: t[2],
                        sign,
                        kp: opt(d, "kp", 2e-5),
                        w: opt(d, "w", 1.0),
                        l: opt(d, "l", 1.0),
                        vt: opt(d, "vt", 0.5 * sign),
                        lambda: opt(d, "lambda", 0.0),
                        tcv: opt(d, "tcv", 0.0),
                        temp: opt(d, "temp", devices::TNOM_CELSIUS),
                        cgs: opt(d, "cgs", 0.0),
                        cgd: opt(d, "cgd", 0.0),
                    }
                }
                DeviceKind::Bjt { pnp } => Element::Bjt {
                    c: t[0],
                    b: t[1],
                    e: t[2],
                    sign: if pnp { -1.0 } else { 1.0 },
                    is: opt(d, "is", 1e-16),
                    bf: opt(d, "bf", 100.0),
                    br: opt(d, "br", 1.0),
                    temp: opt(d, "temp", devices::TNOM_CELSIUS),
                    cbe: opt(d, "cbe", 0.0),
                    cbc: opt(d, "cbc", 0.0),
                },
            };
            elements.push(el);
            element_names.push(d.name.clone());
        }

        let mut circuit = StochasticCircuit {
            title: net.title.clone(),
            state: StateInfo {
                names,
                nodes: n_nodes,
                inductors: inductors.len(),
                vsources: vsources.len(),
            },
            params: net.params.clone(),
            elements,
            element_names,
            sources,
            analyses: net.analyses.clone(),
            warnings: Vec::new(),
        };
        circuit.warnings = circuit.dc_path_warnings(net);
        Ok(circuit)
    }

    /// Nodes with no conducting path to ground at DC.
    fn dc_path_warnings(&self, net: &Netlist) -> Vec<String> {
        let n = self.state.nodes;
        // Union-find over nodes plus a ground slot at index n.
        let mut parent: Vec<usize> = (0..=n).collect();
        fn find(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        let idx = |name: &str| -> usize {
            if is_ground(name) {
                n
            } else {
                self.state.names.iter().position(|s| *s == format!("v({name})")).unwrap()
            }
        };
        for d in &net.devices {
            let conducting: &[usize] = match d.kind {
                DeviceKind::Capacitor | DeviceKind::CurrentSource => &[],
                DeviceKind::Mosfet { .. } => &[0, 2],
                _ => &[0, 1, 2],
            };
            let ids: Vec<usize> = conducting
                .iter()
                .filter(|&&i| i < d.nodes.len())
                .map(|&i| idx(&d.nodes[i]))
                .collect();
            for w in ids.windows(2) {
                let (ra, rb) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
                parent[ra] = rb;
            }
        }
        let ground = find(&mut parent, n);
        (0..n)
            .filter(|&i| find(&mut parent, i) != ground)
            .map(|i| format!("node {} has no DC path to ground", self.state.names[i]))
            .collect()
    }

    /// State dimension `n`.
    pub fn dim(&self) -> usize {
        self.state.names.len()
    }

    /// Germ dimension `l`.
    pub fn germs(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[RandomParameter] {
        &self.params
    }

    pub fn distributions(&self) -> Vec<Distribution> {
        self.params.iter().map(|p| p.dist).collect()
    }

    /// Germ values that put every parameter at its mean.
    pub fn mean_point(&self) -> Vec<f64> {
        self.params.iter().map(|p| p.dist.mean()).collect()
    }

    pub fn state_info(&self) -> &StateInfo {
        &self.state
    }

    pub fn state_names(&self) -> &[String] {
        &self.state.names
    }

    /// Index of `v(node)` or `i(device)`; a bare node name is accepted.
    pub fn state_index(&self, name: &str) -> Option<usize> {
        let lower = name.to_ascii_lowercase();
        self.state
            .names
            .iter()
            .position(|s| *s == lower || *s == format!("v({lower})"))
    }

    pub fn sources(&self) -> &[Source] {
        &self.sources
    }

    pub fn source_index(&self, name: &str) -> Option<usize> {
        let lower = name.to_ascii_lowercase();
        self.sources.iter().position(|s| s.name == lower)
    }

    pub fn analyses(&self) -> &[AnalysisSpec] {
        &self.analyses
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Source values `u(t)`.
    pub fn inputs(&self, t: f64) -> Vec<f64> {
        self.sources.iter().map(|s| s.waveform.value(t)).collect()
    }

    /// Source values for DC analyses.
    pub fn dc_inputs(&self) -> Vec<f64> {
        self.sources.iter().map(|s| s.waveform.dc_value()).collect()
    }

    /// Writes `B·u` into `out`.
    pub fn apply_inputs(&self, u: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (s, &val) in self.sources.iter().zip(u) {
            for &(row, coef) in &s.column {
                out[row] += coef * val;
            }
        }
    }

    pub fn b_matrix(&self) -> DMatrix<f64> {
        let mut b = DMatrix::zeros(self.dim(), self.sources.len());
        for (j, s) in self.sources.iter().enumerate() {
            for &(row, coef) in &s.column {
                b[(row, j)] += coef;
            }
        }
        b
    }

    /// Small-signal excitation `B·u_ac`.
    pub fn ac_excitation(&self) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.dim()];
        for s in &self.sources {
            for &(row, coef) in &s.column {
                out[row] += s.ac * coef;
            }
        }
        out
    }

    /// Source slope discontinuities in `(t0, t1]`.
    pub fn breakpoints(&self, t0: f64, t1: f64) -> Vec<f64> {
        let mut all: Vec<f64> = self.sources.iter().flat_map(|s| s.waveform.breakpoints(t0, t1)).collect();
        all.sort_by(f64::total_cmp);
        all.dedup();
        all
    }

    pub fn eval_qf(&self, x: &[f64], xi: &[f64]) -> Result<QfEval, CircuitError> {
        let mut out = QfEval::zeros(self.dim());
        self.eval_into(x, xi, &mut out)?;
        Ok(out)
    }

    /// Evaluates `q`, `f` and their Jacobians into a reusable buffer.
    pub fn eval_into(&self, x: &[f64], xi: &[f64], out: &mut QfEval) -> Result<(), CircuitError> {
        if x.len() != self.dim() {
            return Err(CircuitError::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        if xi.len() != self.germs() {
            return Err(CircuitError::DimensionMismatch {
                expected: self.germs(),
                got: xi.len(),
            });
        }
        out.clear();
        let p = &self.params;
        let QfEval { q, f, dq, df } = out;
        for (idx, el) in self.elements.iter().enumerate() {
            match *el {
                Element::Resistor { a, b, r } => {
                    stamp_linear(f, df, x, a, b, 1.0 / r.at(p, xi));
                }
                Element::Capacitor { a, b, c } => {
                    stamp_linear(q, dq, x, a, b, c.at(p, xi));
                }
                Element::Inductor { a, b, k, l } => {
                    let il = x[k];
                    stamp_current(f, df, a, b, il, &[(Some(k), 1.0)]);
                    f[k] += volt(x, a) - volt(x, b);
                    if let Some(a) = a {
                        df[(k, a)] += 1.0;
                    }
                    if let Some(b) = b {
                        df[(k, b)] -= 1.0;
                    }
                    let lv = l.at(p, xi);
                    q[k] -= lv * il;
                    dq[(k, k)] -= lv;
                }
                Element::VSource { a, b, k } => {
                    stamp_current(f, df, a, b, x[k], &[(Some(k), 1.0)]);
                    f[k] += volt(x, a) - volt(x, b);
                    if let Some(a) = a {
                        df[(k, a)] += 1.0;
                    }
                    if let Some(b) = b {
                        df[(k, b)] -= 1.0;
                    }
                }
                Element::ISource => {}
                Element::Diode { a, k, is, n, temp, cj } => {
                    let nvt = n.at(p, xi) * devices::thermal_voltage(temp.at(p, xi));
                    let v = volt(x, a) - volt(x, k);
                    let (i, g) = devices::diode(is.at(p, xi), nvt, v);
                    self.finite(idx, i)?;
                    stamp_current(f, df, a, k, i, &[(a, g), (k, -g)]);
                    let c = cj.at(p, xi);
                    if c != 0.0 {
                        stamp_linear(q, dq, x, a, k, c);
                    }
                }
                Element::Mosfet {
                    d,
                    g,
                    s,
                    sign,
                    kp,
                    w,
                    l,
                    vt,
                    lambda,
                    tcv,
                    temp,
                    cgs,
                    cgd,
                } => {
                    let beta = kp.at(p, xi) * w.at(p, xi) / l.at(p, xi);
                    let vth = vt.at(p, xi) + tcv.at(p, xi) * (temp.at(p, xi) - devices::TNOM_CELSIUS);
                    let vs = volt(x, s);
                    let (vgs, vds) = (volt(x, g) - vs, volt(x, d) - vs);
                    let (i, gm, gds) = devices::mosfet(sign, beta, vth, lambda.at(p, xi), vgs, vds);
                    self.finite(idx, i)?;
                    stamp_current(f, df, d, s, i, &[(g, gm), (d, gds), (s, -gm - gds)]);
                    let (c1, c2) = (cgs.at(p, xi), cgd.at(p, xi));
                    if c1 != 0.0 {
                        stamp_linear(q, dq, x, g, s, c1);
                    }
                    if c2 != 0.0 {
                        stamp_linear(q, dq, x, g, d, c2);
                    }
                }
                Element::Bjt {
                    c,
                    b,
                    e,
                    sign,
                    is,
                    bf,
                    br,
                    temp,
                    cbe,
                    cbc,
                } => {
                    let vt = devices::thermal_voltage(temp.at(p, xi));
                    let vb = volt(x, b);
                    let (vbe, vbc) = (vb - volt(x, e), vb - volt(x, c));
                    let m = devices::ebers_moll(sign, is.at(p, xi), bf.at(p, xi), br.at(p, xi), vt, vbe, vbc);
                    self.finite(idx, m.ic + m.ib)?;
                    // Currents entering the device at c and b leave those nodes.
                    let [[ic_be, ic_bc], [ib_be, ib_bc]] = m.jac;
                    let grads_c = [(b, ic_be + ic_bc), (e, -ic_be), (c, -ic_bc)];
                    let grads_b = [(b, ib_be + ib_bc), (e, -ib_be), (c, -ib_bc)];
                    stamp_current(f, df, c, e, m.ic, &grads_c);
                    stamp_current(f, df, b, e, m.ib, &grads_b);
                    let (c1, c2) = (cbe.at(p, xi), cbc.at(p, xi));
                    if c1 != 0.0 {
                        stamp_linear(q, dq, x, b, e, c1);
                    }
                    if c2 != 0.0 {
                        stamp_linear(q, dq, x, b, c, c2);
                    }
                }
            }
        }
        if f.iter().any(|v| !v.is_finite()) || q.iter().any(|v| !v.is_finite()) {
            return Err(CircuitError::Overflow {
                device: "circuit".into(),
            });
        }
        Ok(())
    }

    fn finite(&self, idx: usize, v: f64) -> Result<(), CircuitError> {
        if v.is_finite() {
            Ok(())
        } else {
            Err(CircuitError::Overflow {
                device: self.element_names[idx].clone(),
            })
        }
    }
}
