//! Statevector simulation of the measurement circuits. Qubit 0 is the most
//! significant bit of a basis index; wire 0 is Alice and wire 1 is Bob.

use std::fmt;
use std::str::FromStr;

use crate::assemblage::Assemblage;
use crate::error::{Error, Result};
use crate::history;
use crate::linalg::{self, c64, real, CMatrix, CVector, C64};
use crate::tqsm::{Basis, MeasurementPlan, RotatedMeasurement};

pub const MAX_QUBITS: usize = 8;
pub const MAX_SEQUENCE_ROUNDS: usize = 3;

const ALICE: usize = 0;
const BOB: usize = 1;

/// Gate applied when input bit `input` equals `value`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InputControl {
    pub input: usize,
    pub value: u8,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GateKind {
    H,
    X,
    Z,
    Sdg,
    Ry(f64),
    /// Control first, target second.
    Cnot,
    Cz,
    Swap,
    /// Swap of wires 1 and 2 when wire 0 is `|1>`.
    Cswap,
    /// Swap of wires 1 and 2 when wire 0 is `|0>`.
    OpenCswap,
}

impl GateKind {
    pub fn arity(self) -> usize {
        match self {
            GateKind::H | GateKind::X | GateKind::Z | GateKind::Sdg | GateKind::Ry(_) => 1,
            GateKind::Cnot | GateKind::Cz | GateKind::Swap => 2,
            GateKind::Cswap | GateKind::OpenCswap => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::H => "h",
            GateKind::X => "x",
            GateKind::Z => "z",
            GateKind::Sdg => "sdg",
            GateKind::Ry(_) => "ry",
            GateKind::Cnot => "cx",
            GateKind::Cz => "cz",
            GateKind::Swap => "swap",
            GateKind::Cswap => "cswap",
            GateKind::OpenCswap => "cswap0",
        }
    }

    fn parse(name: &str, angle: Option<f64>) -> Option<GateKind> {
        let k = match name {
            "h" => GateKind::H,
            "x" => GateKind::X,
            "z" => GateKind::Z,
            "sdg" => GateKind::Sdg,
            "ry" => GateKind::Ry(angle?),
            "cx" => GateKind::Cnot,
            "cz" => GateKind::Cz,
            "swap" => GateKind::Swap,
            "cswap" => GateKind::Cswap,
            "cswap0" => GateKind::OpenCswap,
            _ => return None,
        };
        if angle.is_some() && !matches!(k, GateKind::Ry(_)) {
            return None;
        }
        Some(k)
    }

    /// 2x2 matrix of a single-qubit gate.
    fn matrix(self) -> Option<[[C64; 2]; 2]> {
        let (o, l) = (real(0.0), real(1.0));
        let h = real(std::f64::consts::FRAC_1_SQRT_2);
        Some(match self {
            GateKind::H => [[h, h], [h, -h]],
            GateKind::X => [[o, l], [l, o]],
            GateKind::Z => [[l, o], [o, -l]],
            GateKind::Sdg => [[l, o], [o, c64(0.0, -1.0)]],
            GateKind::Ry(t) => {
                let (c, s) = ((t / 2.0).cos(), (t / 2.0).sin());
                [[real(c), real(-s)], [real(s), real(c)]]
            }
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub kind: GateKind,
    pub wires: Vec<usize>,
    pub control: Option<InputControl>,
}

/// Computational-basis readout of `wire` as the outcome of `round` (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Measurement {
    pub wire: usize,
    pub round: usize,
    pub control: Option<InputControl>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    qubits: usize,
    inputs: usize,
    gates: Vec<Gate>,
    measurements: Vec<Measurement>,
}

fn circuit_err(msg: impl Into<String>) -> Error {
    Error::Circuit(msg.into())
}

impl Circuit {
    pub fn new(qubits: usize, inputs: usize) -> Result<Self> {
        if qubits == 0 || qubits > MAX_QUBITS {
            return Err(circuit_err(format!("{qubits} qubits outside 1..={MAX_QUBITS}")));
        }
        Ok(Circuit { qubits, inputs, gates: Vec::new(), measurements: Vec::new() })
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn measurements(&self) -> &[Measurement] {
        &self.measurements
    }

    /// Number of rounds read out.
    pub fn rounds(&self) -> usize {
        self.measurements.iter().map(|m| m.round).max().unwrap_or(0)
    }

    fn check_control(&self, control: Option<InputControl>) -> Result<()> {
        if let Some(c) = control {
            if c.input >= self.inputs || c.value > 1 {
                return Err(circuit_err(format!("control y{}={} not declared", c.input, c.value)));
            }
        }
        Ok(())
    }

    pub fn push(&mut self, kind: GateKind, wires: &[usize], control: Option<InputControl>) -> Result<()> {
        if wires.len() != kind.arity() {
            return Err(circuit_err(format!("{} takes {} wires, got {}", kind.name(), kind.arity(), wires.len())));
        }
        if let Some(&w) = wires.iter().find(|&&w| w >= self.qubits) {
            return Err(circuit_err(format!("wire {w} out of range")));
        }
        if (1..wires.len()).any(|i| wires[..i].contains(&wires[i])) {
            return Err(circuit_err(format!("repeated wire in {}", kind.name())));
        }
        if let GateKind::Ry(t) = kind {
            if !t.is_finite() {
                return Err(circuit_err("non-finite rotation angle"));
            }
        }
        self.check_control(control)?;
        self.gates.push(Gate { kind, wires: wires.to_vec(), control });
        Ok(())
    }

    pub fn measure(&mut self, wire: usize, round: usize, control: Option<InputControl>) -> Result<()> {
        if wire >= self.qubits || wire == ALICE {
            return Err(circuit_err(format!("cannot read out wire {wire}")));
        }
        if round == 0 {
            return Err(circuit_err("rounds are numbered from 1"));
        }
        self.check_control(control)?;
        self.measurements.push(Measurement { wire, round, control });
        Ok(())
    }

    /// Appends `frag` with its wire `i` mapped to `wires[i]`, adding `control`
    /// to every gate and measurement round offset by `round_offset`.
    pub fn compose(&mut self, frag: &Circuit, wires: &[usize], control: Option<InputControl>, round_offset: usize) -> Result<()> {
        if wires.len() != frag.qubits {
            return Err(circuit_err("fragment wire map has the wrong length"));
        }
        for g in &frag.gates {
            let mapped: Vec<usize> = g.wires.iter().map(|&w| wires[w]).collect();
            self.push(g.kind, &mapped, control.or(g.control))?;
        }
        for m in &frag.measurements {
            self.measure(wires[m.wire], m.round + round_offset, control.or(m.control))?;
        }
        Ok(())
    }

    fn active(control: Option<InputControl>, inputs: &[u8]) -> bool {
        control.is_none_or(|c| inputs[c.input] == c.value)
    }

    fn mask(&self, wire: usize) -> usize {
        1 << (self.qubits - 1 - wire)
    }

    /// Applies the gates selected by `inputs` to `state`.
    pub fn apply(&self, state: &mut CVector, inputs: &[u8]) -> Result<()> {
        if inputs.len() != self.inputs {
            return Err(circuit_err(format!("{} inputs given, circuit declares {}", inputs.len(), self.inputs)));
        }
        if state.len() != 1 << self.qubits {
            return Err(Error::Dimension(format!("state of length {} on {} qubits", state.len(), self.qubits)));
        }
        for g in self.gates.iter().filter(|g| Self::active(g.control, inputs)) {
            let m: Vec<usize> = g.wires.iter().map(|&w| self.mask(w)).collect();
            match g.kind {
                GateKind::Cnot => apply_1q(state, m[1], GateKind::X.matrix().unwrap(), m[0]),
                GateKind::Cz => apply_1q(state, m[1], GateKind::Z.matrix().unwrap(), m[0]),
                GateKind::Swap => apply_swap(state, m[0], m[1], 0, 0),
                GateKind::Cswap => apply_swap(state, m[1], m[2], m[0], m[0]),
                GateKind::OpenCswap => apply_swap(state, m[1], m[2], m[0], 0),
                k => apply_1q(state, m[0], k.matrix().unwrap(), 0),
            }
        }
        Ok(())
    }

    /// Outcome history of basis index `i`.
    fn history_of(&self, i: usize, active: &[&Measurement], rounds: usize) -> usize {
        let mut bits = vec![0u8; rounds];
        for m in active {
            bits[m.round - 1] = u8::from(i & self.mask(m.wire) != 0);
        }
        history::from_bits(&bits)
    }

    fn active_measurements(&self, inputs: &[u8]) -> Result<Vec<&Measurement>> {
        let rounds = self.rounds();
        let active: Vec<&Measurement> = self.measurements.iter().filter(|m| Self::active(m.control, inputs)).collect();
        for r in 1..=rounds {
            let n = active.iter().filter(|m| m.round == r).count();
            if n != 1 {
                return Err(circuit_err(format!("round {r} read out {n} times for inputs {inputs:?}")));
            }
        }
        Ok(active)
    }

    /// Unnormalized conditional states of Alice, one per outcome history, for
    /// the two-qubit input `rho` (Alice, Bob) with every other wire in `|0>`.
    pub fn conditional_states(&self, rho: &CMatrix, inputs: &[u8]) -> Result<Vec<CMatrix>> {
        let rounds = self.rounds();
        let active = self.active_measurements(inputs)?;
        let k = 1usize << rounds;
        let mut out = vec![CMatrix::zeros(2, 2); k];
        for (w, psi) in ensemble(rho)? {
            let mut state = self.embed(&psi);
            self.apply(&mut state, inputs)?;
            let am = self.mask(ALICE);
            for i in (0..state.len()).filter(|i| i & am == 0) {
                let (u, v) = (state[i], state[i | am]);
                let s = &mut out[self.history_of(i, &active, rounds)];
                s[(0, 0)] += real(w * u.norm_sqr());
                s[(0, 1)] += real(w) * u * v.conj();
                s[(1, 0)] += real(w) * v * u.conj();
                s[(1, 1)] += real(w * v.norm_sqr());
            }
        }
        Ok(out)
    }

    /// Joint distribution of Alice's computational-basis outcome `a` and the
    /// history `b`, indexed `b * 2 + a`, after the extra gates in `alice_basis`.
    pub fn joint_distribution(&self, rho: &CMatrix, inputs: &[u8], alice_basis: &[GateKind]) -> Result<Vec<f64>> {
        let mut rotated = self.clone();
        for &g in alice_basis {
            rotated.push(g, &[ALICE], None)?;
        }
        let states = rotated.conditional_states(rho, inputs)?;
        Ok(states.iter().flat_map(|s| [s[(0, 0)].re.max(0.0), s[(1, 1)].re.max(0.0)]).collect())
    }

    fn embed(&self, psi: &CVector) -> CVector {
        let shift = self.qubits - 2;
        let mut v = CVector::zeros(1 << self.qubits);
        for (i, a) in psi.iter().enumerate() {
            v[i << shift] = *a;
        }
        v
    }

    /// Renders the circuit in the text gate-list format.
    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

fn apply_1q(state: &mut CVector, target: usize, u: [[C64; 2]; 2], ctrl: usize) {
    for i in 0..state.len() {
        if i & target != 0 || i & ctrl != ctrl {
            continue;
        }
        let j = i | target;
        let (a, b) = (state[i], state[j]);
        state[i] = u[0][0] * a + u[0][1] * b;
        state[j] = u[1][0] * a + u[1][1] * b;
    }
}

/// Swaps the `a` and `b` bits on indices whose `ctrl` bits equal `want`.
fn apply_swap(state: &mut CVector, a: usize, b: usize, ctrl: usize, want: usize) {
    for i in 0..state.len() {
        if i & a != 0 && i & b == 0 && i & ctrl == want {
            state.swap_rows(i, i ^ a ^ b);
        }
    }
}

/// Eigen-ensemble `(weight, vector)` of a two-qubit density matrix.
fn ensemble(rho: &CMatrix) -> Result<Vec<(f64, CVector)>> {
    if rho.nrows() != 4 || rho.ncols() != 4 {
        return Err(Error::Dimension(format!("expected a 4x4 state, got {}x{}", rho.nrows(), rho.ncols())));
    }
    let (vals, vecs) = linalg::eigh(rho)?;
    Ok(vals
        .iter()
        .enumerate()
        .filter(|(_, &l)| l > 1e-15)
        .map(|(k, &l)| (l, vecs.column(k).into_owned()))
        .collect())
}

fn fmt_control(c: Option<InputControl>) -> String {
    c.map_or("-".into(), |c| format!("y{}={}", c.input, c.value))
}

/// Text format, one item per line:
///
/// ```text
/// qubits 3 inputs 1
/// ry 2 0.39269908169872414 y0=1
/// cx 2,1 - y0=1
/// measure 2 1 -
/// ```
///
/// Gate lines are `name wires angle control` with comma-separated wires, `-`
/// for no angle or no control. Measurement lines are `measure wire round control`.
/// `#` starts a comment.
impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "qubits {} inputs {}", self.qubits, self.inputs)?;
        for g in &self.gates {
            let wires: Vec<String> = g.wires.iter().map(|w| w.to_string()).collect();
            let angle = match g.kind {
                GateKind::Ry(t) => format!("{t:?}"),
                _ => "-".into(),
            };
            writeln!(f, "{} {} {} {}", g.kind.name(), wires.join(","), angle, fmt_control(g.control))?;
        }
        for m in &self.measurements {
            writeln!(f, "measure {} {} {}", m.wire, m.round, fmt_control(m.control))?;
        }
        Ok(())
    }
}

fn parse_control(s: &str) -> Option<Option<InputControl>> {
    if s == "-" {
        return Some(None);
    }
    let (i, v) = s.strip_prefix('y')?.split_once('=')?;
    Some(Some(InputControl { input: i.parse().ok()?, value: v.parse().ok()? }))
}

impl FromStr for Circuit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut lines = s
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let bad = |n: usize, msg: &str| circuit_err(format!("line {n}: {msg}"));
        let (n, header) = lines.next().ok_or_else(|| circuit_err("empty circuit text"))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        let mut c = match h.as_slice() {
            ["qubits", q, "inputs", i] => Circuit::new(
                q.parse().map_err(|_| bad(n, "bad qubit count"))?,
                i.parse().map_err(|_| bad(n, "bad input count"))?,
            )?,
            _ => return Err(bad(n, "expected `qubits N inputs M`")),
        };
        for (n, line) in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 4 {
                return Err(bad(n, "expected four fields"));
            }
            let control = parse_control(f[3]).ok_or_else(|| bad(n, "bad control key"))?;
            if f[0] == "measure" {
                let wire = f[1].parse().map_err(|_| bad(n, "bad wire"))?;
                let round = f[2].parse().map_err(|_| bad(n, "bad round"))?;
                c.measure(wire, round, control).map_err(|e| bad(n, &e.to_string()))?;
                continue;
            }
            let angle = match f[2] {
                "-" => None,
                a => Some(a.parse::<f64>().map_err(|_| bad(n, "bad angle"))?),
            };
            let kind = GateKind::parse(f[0], angle).ok_or_else(|| bad(n, "unknown gate or misplaced angle"))?;
            let wires: Vec<usize> =
                f[1].split(',').map(|w| w.parse()).collect::<std::result::Result<_, _>>().map_err(|_| bad(n, "bad wires"))?;
            c.push(kind, &wires, control).map_err(|e| bad(n, &e.to_string()))?;
        }
        Ok(c)
    }
}

/// Two-qubit gadget (wire 0 ancilla, wire 1 data) whose ancilla readout
/// implements `m` on the data qubit: `Ry(2a)`, `H`, controlled Pauli, `H`.
pub fn build_measurement_gadget(m: &RotatedMeasurement) -> Circuit {
    let mut c = Circuit::new(2, 0).expect("two qubits");
    let coupling = match m.basis() {
        Basis::X => GateKind::Cnot,
        Basis::Z => GateKind::Cz,
    };
    for (k, w) in [
        (GateKind::Ry(2.0 * m.angle()), &[0][..]),
        (GateKind::H, &[0][..]),
        (coupling, &[0, 1][..]),
        (GateKind::H, &[0][..]),
    ] {
        c.push(k, w, None).expect("valid gadget gate");
    }
    // wire 0 is the ancilla here, so bypass the Alice-wire check
    c.measurements.push(Measurement { wire: 0, round: 1, control: None });
    c
}

/// Operators `K_b = <b|_anc U |0>_anc` induced on the data qubit by a gadget.
pub fn gadget_instrument(gadget: &Circuit) -> Result<[CMatrix; 2]> {
    if gadget.qubits != 2 {
        return Err(circuit_err("gadgets act on two wires"));
    }
    let mut k = [CMatrix::zeros(2, 2), CMatrix::zeros(2, 2)];
    for j in 0..2 {
        let mut v = linalg::ket(4, j);
        gadget.apply(&mut v, &[])?;
        for (b, kb) in k.iter_mut().enumerate() {
            kb[(0, j)] = v[2 * b];
            kb[(1, j)] = v[2 * b + 1];
        }
    }
    Ok(k)
}

fn check_plan(plan: &MeasurementPlan, n: usize) -> Result<()> {
    if n == 0 || n > MAX_SEQUENCE_ROUNDS {
        return Err(circuit_err(format!("{n} rounds exceed the ancilla budget of {MAX_SEQUENCE_ROUNDS}")));
    }
    if n > plan.len() {
        return Err(Error::PlanTooShort { got: n, rounds: plan.len() });
    }
    if plan.stop_after_projective() {
        return Err(circuit_err("plans that stop after projective rounds have no circuit form"));
    }
    Ok(())
}

/// Classically controlled circuit for `n` rounds: wire `1 + k` is the ancilla of
/// round `k`, and input `y_k` selects the Z gadget (`0`) or the X gadget (`1`).
pub fn build_sequence_circuit(plan: &MeasurementPlan, n: usize) -> Result<Circuit> {
    check_plan(plan, n)?;
    let mut c = Circuit::new(2 + n, n)?;
    for (k, round) in plan.rounds()[..n].iter().enumerate() {
        for (y, m) in [(0u8, &round.z), (1, &round.x)] {
            let ctrl = Some(InputControl { input: k, value: y });
            c.compose(&build_measurement_gadget(m), &[2 + k, BOB], ctrl, k)?;
        }
    }
    Ok(c)
}

/// Quantum-controlled variant: each input is loaded into a control qubit, a
/// controlled swap routes Bob's qubit to the X gadget (`|1>`) or to a work wire
/// carrying the Z gadget (`|0>`), and the selected ancilla is read out. Uses
/// `2 + 4n` qubits.
pub fn build_quantum_controlled_circuit(plan: &MeasurementPlan, n: usize) -> Result<Circuit> {
    check_plan(plan, n)?;
    let qubits = 2 + 4 * n;
    if qubits > MAX_QUBITS {
        return Err(circuit_err(format!("{n} quantum-controlled rounds need {qubits} qubits, limit {MAX_QUBITS}")));
    }
    let mut c = Circuit::new(qubits, n)?;
    for (k, round) in plan.rounds()[..n].iter().enumerate() {
        let (y, ax, az, work) = (2 + 4 * k, 3 + 4 * k, 4 + 4 * k, 5 + 4 * k);
        c.push(GateKind::X, &[y], Some(InputControl { input: k, value: 1 }))?;
        c.push(GateKind::OpenCswap, &[y, BOB, work], None)?;
        c.compose(&build_measurement_gadget(&round.x), &[ax, BOB], None, k)?;
        c.compose(&build_measurement_gadget(&round.z), &[az, work], None, k)?;
        c.push(GateKind::OpenCswap, &[y, BOB, work], None)?;
        // only the selected ancilla carries the round outcome
        c.measurements.retain(|m| m.round != k + 1);
        c.measure(ax, k + 1, Some(InputControl { input: k, value: 1 }))?;
        c.measure(az, k + 1, Some(InputControl { input: k, value: 0 }))?;
    }
    Ok(c)
}

/// Exact assemblage `sigma_{b|y}` of a circuit over all input strings.
pub fn circuit_assemblage(c: &Circuit, rho: &CMatrix) -> Result<Assemblage> {
    let n = c.rounds();
    if n == 0 || c.inputs != n {
        return Err(circuit_err("assemblages need one input bit per read-out round"));
    }
    let k = 1usize << n;
    let mut elements = Vec::with_capacity(k * k);
    for y in 0..k {
        for s in c.conditional_states(rho, &history::to_bits(y, n))? {
            elements.push(linalg::hermitian_part(&s));
        }
    }
    Assemblage::new(n, elements)
}
