//! Headless force-directed layout and static SVG rendering.
//!
//! Each step accumulates three forces per node (pairwise inverse-square
//! repulsion, Hooke springs along edges, a linear pull towards the origin),
//! then integrates with unit mass and unit time step:
//!
//! ```text
//! v <- (v + F) * (1 - velocity_decay)
//! x <- x + v
//! ```
//!
//! Everything is sequential and seeded, so a (graph, config) pair always
//! yields bit-identical positions on a given platform.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Edge, KnowledgeGraph, NodeId, RadiusScale};

#[derive(Debug, Error, PartialEq)]
pub enum LayoutError {
    #[error("no position for node {0}")]
    MissingPosition(NodeId),
    #[error("layout state has {state} nodes but the graph has {graph}")]
    StateMismatch { state: usize, graph: usize },
    #[error("invalid layout configuration: {0}")]
    Config(String),
}

impl LayoutError {
    pub fn code(&self) -> &'static str {
        match self {
            LayoutError::MissingPosition(_) => "E_MISSING_POSITION",
            LayoutError::StateMismatch { .. } => "E_STATE_MISMATCH",
            LayoutError::Config(_) => "E_CONFIG",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point) -> f64 {
        (other - self).norm()
    }
}

impl std::ops::Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl std::ops::Mul<f64> for Point {
    type Output = Point;
    fn mul(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }
}

impl std::ops::AddAssign for Point {
    fn add_assign(&mut self, o: Point) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl std::ops::SubAssign for Point {
    fn sub_assign(&mut self, o: Point) {
        self.x -= o.x;
        self.y -= o.y;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LayoutConfig {
    pub repulsion_strength: f64,
    pub spring_rest_length: f64,
    pub spring_stiffness: f64,
    pub centering_strength: f64,
    pub velocity_decay: f64,
    pub max_iterations: usize,
    pub displacement_epsilon: f64,
    pub seed: u64,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        LayoutConfig {
            repulsion_strength: 1000.0,
            spring_rest_length: 60.0,
            spring_stiffness: 0.08,
            centering_strength: 0.05,
            velocity_decay: 0.4,
            max_iterations: 300,
            displacement_epsilon: 0.1,
            seed: 42,
        }
    }
}

impl LayoutConfig {
    pub fn validate(&self) -> Result<(), LayoutError> {
        let bad = |what: &str| Err(LayoutError::Config(what.to_owned()));
        if !(self.repulsion_strength > 0.0) {
            return bad("repulsion_strength must be > 0");
        }
        if !(self.spring_rest_length >= 0.0) {
            return bad("spring_rest_length must be >= 0");
        }
        if !(self.spring_stiffness > 0.0 && self.spring_stiffness <= 1.0) {
            return bad("spring_stiffness must be in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.centering_strength) {
            return bad("centering_strength must be in [0, 1]");
        }
        if !(self.velocity_decay > 0.0 && self.velocity_decay < 1.0) {
            return bad("velocity_decay must be in (0, 1)");
        }
        if !(self.displacement_epsilon >= 0.0) {
            return bad("displacement_epsilon must be >= 0");
        }
        Ok(())
    }
}

/// Simulation state, one slot per node in graph order.
#[derive(Debug, Clone, PartialEq)]
pub struct LayoutState {
    pub ids: Vec<NodeId>,
    pub positions: Vec<Point>,
    pub velocities: Vec<Point>,
    pub pinned: Vec<bool>,
    pub iteration: usize,
}

pub type Positions = BTreeMap<NodeId, Point>;

impl LayoutState {
    fn slot(&self, id: NodeId) -> Option<usize> {
        self.ids.iter().position(|&n| n == id)
    }

    pub fn position(&self, id: NodeId) -> Option<Point> {
        self.slot(id).map(|i| self.positions[i])
    }

    /// Fixes a node, optionally moving it first (a drag).
    pub fn pin(&mut self, id: NodeId, at: Option<Point>) -> Result<(), LayoutError> {
        let i = self.slot(id).ok_or(LayoutError::MissingPosition(id))?;
        if let Some(p) = at {
            self.positions[i] = p;
        }
        self.pinned[i] = true;
        self.velocities[i] = Point::ORIGIN;
        Ok(())
    }

    pub fn unpin(&mut self, id: NodeId) -> Result<(), LayoutError> {
        let i = self.slot(id).ok_or(LayoutError::MissingPosition(id))?;
        self.pinned[i] = false;
        Ok(())
    }

    pub fn to_positions(&self) -> Positions {
        self.ids.iter().copied().zip(self.positions.iter().copied()).collect()
    }
}

/// Seeded uniform placement in a square of side `100 * sqrt(n)` centred on
/// the origin; all velocities zero.
pub fn initial_positions(graph: &KnowledgeGraph, seed: u64) -> LayoutState {
    let n = graph.node_count();
    let half = 50.0 * (n as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positions = (0..n)
        .map(|_| {
            if half == 0.0 {
                Point::ORIGIN
            } else {
                Point::new(rng.gen_range(-half..=half), rng.gen_range(-half..=half))
            }
        })
        .collect();
    LayoutState {
        ids: graph.nodes().iter().map(|node| node.id).collect(),
        positions,
        velocities: vec![Point::ORIGIN; n],
        pinned: vec![false; n],
        iteration: 0,
    }
}

/// Unit vector used to separate two nodes sitting on the same spot.
fn fallback_direction(i: usize, j: usize) -> Point {
    const GOLDEN_ANGLE: f64 = 2.399_963_229_728_653;
    let angle = (i as f64 + 1.0) * GOLDEN_ANGLE + j as f64;
    Point::new(angle.cos(), angle.sin())
}

fn spring_pairs(state: &LayoutState, graph: &KnowledgeGraph) -> Result<Vec<(usize, usize)>, LayoutError> {
    graph
        .edges()
        .iter()
        .filter(|e: &&Edge| e.source != e.target)
        .map(|e| {
            let s = graph.position(e.source).filter(|&i| state.ids.get(i) == Some(&e.source));
            let t = graph.position(e.target).filter(|&i| state.ids.get(i) == Some(&e.target));
            match (s, t) {
                (Some(s), Some(t)) => Ok((s, t)),
                (None, _) => Err(LayoutError::MissingPosition(e.source)),
                (_, None) => Err(LayoutError::MissingPosition(e.target)),
            }
        })
        .collect()
}

/// Advances the state in place and returns the largest displacement.
fn advance(state: &mut LayoutState, springs: &[(usize, usize)], config: &LayoutConfig) -> f64 {
    let n = state.positions.len();
    let mut forces = vec![Point::ORIGIN; n];
    let pos = &state.positions;

    for i in 0..n {
        for j in i + 1..n {
            let delta = pos[j] - pos[i];
            let d = delta.norm();
            let dir = if d > 0.0 { delta * (1.0 / d) } else { fallback_direction(i, j) };
            let clamped = d.max(1.0);
            let push = dir * (config.repulsion_strength / (clamped * clamped));
            forces[i] -= push;
            forces[j] += push;
        }
    }

    for &(s, t) in springs {
        let delta = pos[t] - pos[s];
        let d = delta.norm();
        if d == 0.0 {
            continue;
        }
        let pull = delta * (config.spring_stiffness * (d - config.spring_rest_length) / d);
        forces[s] += pull;
        forces[t] -= pull;
    }

    let mut max_step: f64 = 0.0;
    for i in 0..n {
        if state.pinned[i] {
            state.velocities[i] = Point::ORIGIN;
            continue;
        }
        let force = forces[i] - state.positions[i] * config.centering_strength;
        let v = (state.velocities[i] + force) * (1.0 - config.velocity_decay);
        state.velocities[i] = v;
        state.positions[i] += v;
        max_step = max_step.max(v.norm());
    }
    state.iteration += 1;
    max_step
}

/// One simulation step; returns the next state.
pub fn step(
    state: &LayoutState,
    graph: &KnowledgeGraph,
    config: &LayoutConfig,
) -> Result<LayoutState, LayoutError> {
    check_state(state, graph)?;
    let springs = spring_pairs(state, graph)?;
    let mut next = state.clone();
    advance(&mut next, &springs, config);
    Ok(next)
}

fn check_state(state: &LayoutState, graph: &KnowledgeGraph) -> Result<(), LayoutError> {
    if state.positions.len() != graph.node_count()
        || state.velocities.len() != graph.node_count()
        || state.pinned.len() != graph.node_count()
        || state.ids.len() != graph.node_count()
    {
        return Err(LayoutError::StateMismatch {
            state: state.positions.len(),
            graph: graph.node_count(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayoutOutcome {
    pub positions: Positions,
    pub converged: bool,
    pub iterations: usize,
    pub state: LayoutState,
}

/// Seeds the layout from `config.seed` and runs it to convergence.
pub fn run_layout(graph: &KnowledgeGraph, config: &LayoutConfig) -> Result<LayoutOutcome, LayoutError> {
    run_layout_from(initial_positions(graph, config.seed), graph, config)
}

/// Steps until the largest per-node displacement drops below
/// `displacement_epsilon` or `max_iterations` is reached.
pub fn run_layout_from(
    mut state: LayoutState,
    graph: &KnowledgeGraph,
    config: &LayoutConfig,
) -> Result<LayoutOutcome, LayoutError> {
    config.validate()?;
    check_state(&state, graph)?;
    let springs = spring_pairs(&state, graph)?;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iterations {
        let moved = advance(&mut state, &springs, config);
        iterations += 1;
        if moved < config.displacement_epsilon {
            converged = true;
            break;
        }
    }
    Ok(LayoutOutcome {
        positions: state.to_positions(),
        converged,
        iterations,
        state,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvgOptions {
    pub show_labels: bool,
    pub width: f64,
    pub height: f64,
    pub margin: f64,
    pub radius: RadiusScale,
}

impl Default for SvgOptions {
    fn default() -> Self {
        SvgOptions {
            show_labels: true,
            width: 960.0,
            height: 720.0,
            margin: 40.0,
            radius: RadiusScale::default(),
        }
    }
}

/// A quadratic Bézier segment in output coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadCurve {
    pub start: Point,
    pub control: Point,
    pub end: Point,
}

impl QuadCurve {
    /// Control point sits on the chord's perpendicular bisector, offset by
    /// `curvature * chord length` towards the chord's left-hand normal.
    pub fn between(start: Point, end: Point, curvature: f64) -> Self {
        let chord = end - start;
        let mid = (start + end) * 0.5;
        // (-dy, dx) has the chord's length, so scaling it by the curvature
        // gives an offset of curvature * |chord|
        let control = mid + Point::new(-chord.y, chord.x) * curvature;
        QuadCurve { start, control, end }
    }

    /// Signed distance of the control point from the chord (left positive).
    pub fn perpendicular_offset(&self) -> f64 {
        let chord = self.end - self.start;
        let len = chord.norm();
        if len == 0.0 {
            return 0.0;
        }
        let rel = self.control - self.start;
        (chord.x * rel.y - chord.y * rel.x) / len
    }
}

/// Maps layout coordinates into the drawing area, preserving aspect ratio.
#[derive(Debug, Clone, Copy)]
struct Viewport {
    scale: f64,
    offset: Point,
    centre: Point,
}

impl Viewport {
    fn fit(points: &[Point], options: &SvgOptions) -> Self {
        let centre = Point::new(options.width / 2.0, options.height / 2.0);
        if points.is_empty() {
            return Viewport {
                scale: 1.0,
                offset: Point::ORIGIN,
                centre,
            };
        }
        let (mut min, mut max) = (points[0], points[0]);
        for p in points {
            min = Point::new(min.x.min(p.x), min.y.min(p.y));
            max = Point::new(max.x.max(p.x), max.y.max(p.y));
        }
        let span_x = max.x - min.x;
        let span_y = max.y - min.y;
        let room_x = (options.width - 2.0 * options.margin).max(1.0);
        let room_y = (options.height - 2.0 * options.margin).max(1.0);
        let mut scale = f64::INFINITY;
        if span_x > 0.0 {
            scale = scale.min(room_x / span_x);
        }
        if span_y > 0.0 {
            scale = scale.min(room_y / span_y);
        }
        if !scale.is_finite() {
            scale = 1.0;
        }
        Viewport {
            scale,
            offset: (min + max) * 0.5,
            centre,
        }
    }

    fn apply(&self, p: Point) -> Point {
        self.centre + (p - self.offset) * self.scale
    }
}

/// What the renderer draws for one edge.
#[derive(Debug, Clone, PartialEq)]
pub enum EdgeShape {
    Curve(QuadCurve),
    /// Self-loop: two quadratic segments leaving and re-entering the node.
    Loop { anchor: Point, first: Point, apex: Point, second: Point },
}

impl EdgeShape {
    fn path_data(&self) -> String {
        match self {
            EdgeShape::Curve(c) => format!(
                "M{} {} Q{} {} {} {}",
                num(c.start.x),
                num(c.start.y),
                num(c.control.x),
                num(c.control.y),
                num(c.end.x),
                num(c.end.y)
            ),
            EdgeShape::Loop {
                anchor,
                first,
                apex,
                second,
            } => format!(
                "M{} {} Q{} {} {} {} Q{} {} {} {}",
                num(anchor.x),
                num(anchor.y),
                num(first.x),
                num(first.y),
                num(apex.x),
                num(apex.y),
                num(second.x),
                num(second.y),
                num(anchor.x),
                num(anchor.y)
            ),
        }
    }
}

/// Output-space geometry of every edge, in graph edge order.
pub fn edge_shapes(
    graph: &KnowledgeGraph,
    positions: &Positions,
    options: &SvgOptions,
) -> Result<Vec<EdgeShape>, LayoutError> {
    let viewport = viewport_for(graph, positions, options)?;
    graph
        .edges()
        .iter()
        .map(|e| {
            let s = viewport.apply(lookup(positions, e.source)?);
            let t = viewport.apply(lookup(positions, e.target)?);
            if e.source == e.target {
                let node = graph.node(e.source).expect("edge endpoint exists");
                let r = graph.radius(node, &options.radius);
                let reach = 3.0 * r * (1.0 + 2.0 * e.curvature.abs());
                Ok(EdgeShape::Loop {
                    anchor: s,
                    first: s + Point::new(-reach, -reach * 0.5),
                    apex: s + Point::new(0.0, -reach),
                    second: s + Point::new(reach, -reach * 0.5),
                })
            } else {
                Ok(EdgeShape::Curve(QuadCurve::between(s, t, e.curvature)))
            }
        })
        .collect()
}

fn lookup(positions: &Positions, id: NodeId) -> Result<Point, LayoutError> {
    positions.get(&id).copied().ok_or(LayoutError::MissingPosition(id))
}

fn viewport_for(
    graph: &KnowledgeGraph,
    positions: &Positions,
    options: &SvgOptions,
) -> Result<Viewport, LayoutError> {
    let points = graph
        .nodes()
        .iter()
        .map(|n| lookup(positions, n.id))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Viewport::fit(&points, options))
}

/// Fixed three-decimal output without a negative zero.
fn num(v: f64) -> String {
    let text = format!("{v:.3}");
    let trimmed = text.trim_end_matches('0').trim_end_matches('.');
    match trimmed {
        "-0" | "" => "0".to_owned(),
        other => other.to_owned(),
    }
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Renders an SVG 1.1 document: edge paths first, then node circles, then
/// edge labels on top.
pub fn render_svg(
    graph: &KnowledgeGraph,
    positions: &Positions,
    options: &SvgOptions,
) -> Result<String, LayoutError> {
    let viewport = viewport_for(graph, positions, options)?;
    let shapes = edge_shapes(graph, positions, options)?;
    let mut svg = String::new();
    let (w, h) = (num(options.width), num(options.height));
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" xmlns:xlink="http://www.w3.org/1999/xlink" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );

    svg.push_str("<g class=\"edges\" fill=\"none\" stroke=\"#8a8f98\">\n");
    for (i, (edge, shape)) in graph.edges().iter().zip(&shapes).enumerate() {
        let width = 1.0 + (edge.multiplicity as f64).log2();
        let _ = writeln!(
            svg,
            r#"<path id="edge-{i}" d="{}" stroke-width="{}"><title>{}</title></path>"#,
            shape.path_data(),
            num(width),
            escape(&edge.relation)
        );
    }
    svg.push_str("</g>\n");

    svg.push_str("<g class=\"nodes\" fill=\"#4c78a8\" stroke=\"#ffffff\">\n");
    for node in graph.nodes() {
        let p = viewport.apply(lookup(positions, node.id)?);
        let _ = writeln!(
            svg,
            r#"<circle cx="{}" cy="{}" r="{}"><title>{}</title></circle>"#,
            num(p.x),
            num(p.y),
            num(graph.radius(node, &options.radius)),
            escape(&node.label)
        );
    }
    svg.push_str("</g>\n");

    if options.show_labels {
        svg.push_str(
            "<g class=\"labels\" font-family=\"sans-serif\" font-size=\"10\" fill=\"#333333\">\n",
        );
        for (i, edge) in graph.edges().iter().enumerate() {
            let _ = writeln!(
                svg,
                "<text><textPath xlink:href=\"#edge-{i}\" startOffset=\"50%\" text-anchor=\"middle\">{}</textPath></text>",
                escape(edge.display_label())
            );
        }
        svg.push_str("</g>\n");
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
