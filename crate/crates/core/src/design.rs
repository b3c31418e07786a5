//! Parametric geometry of the two-arm hot/cold-arm microgripper.
//!
//! Plan view coordinates: `x` runs from the back of the anchor (x = 0) to the
//! tips (x = footprint_length), `y` spans the footprint width with the gripper
//! midline at `y = footprint_width / 2`, `z` is the stack direction. Looking
//! from the anchor towards the tips, the left arm is at `y > midline`.
//!
//! Each arm is built from axis-aligned rectangles:
//!
//! ```text
//!   y=W  +--------------------------------hot underarm--+--+
//!        |      |==========trace (outer leg)==========| |  |
//!        | fixed|==========trace (inner leg)==========| |c |
//!        | part |            gap                       |o |
//!        |      |  flexure +--cold underarm------------+n |--------jaw----+
//!   mid  +------+----------+-------------------------------------- tip ----+
//! ```

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::materials::{MaterialLibrary, GOLD, SIO2, SU8};
use crate::mesh::{Block, BlockModel, FaceSelector, PartInfo, Region, TerminalSpec, TipSpec};

const GEOM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerRole {
    SubstrateOxide,
    StructuralPolymer,
    Conductor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    pub material: String,
    /// um
    pub thickness: f64,
    pub role: LayerRole,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetalPlacement {
    /// Conductor on both faces of the polymer core.
    BothFaces,
    /// One conductor layer between two equal polymer layers.
    Midplane,
    /// One conductor layer whose center sits this many um above the polymer
    /// midplane.
    ParametricOffset(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArmSide {
    Left,
    Right,
}

impl ArmSide {
    pub fn mirrored(self) -> ArmSide {
        match self {
            ArmSide::Left => ArmSide::Right,
            ArmSide::Right => ArmSide::Left,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ArmSide::Left => "left",
            ArmSide::Right => "right",
        }
    }

    /// +1 for the left arm (y > midline), -1 for the right arm.
    pub fn sign(self) -> f64 {
        match self {
            ArmSide::Left => 1.0,
            ArmSide::Right => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    /// Held at the applied voltage.
    Supply,
    /// Held at 0 V.
    Return,
}

/// Axis-aligned plan rectangle, um.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Rect {
        Rect { x0, x1, y0, y1 }
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }

    pub fn is_degenerate(&self) -> bool {
        !(self.x1 - self.x0 > GEOM_TOL && self.y1 - self.y0 > GEOM_TOL)
    }

    pub fn mirror_y(&self, mid: f64) -> Rect {
        Rect::new(self.x0, self.x1, 2.0 * mid - self.y1, 2.0 * mid - self.y0)
    }

    fn approx_eq(&self, other: &Rect) -> bool {
        (self.x0 - other.x0).abs() <= GEOM_TOL
            && (self.x1 - other.x1).abs() <= GEOM_TOL
            && (self.y0 - other.y0).abs() <= GEOM_TOL
            && (self.y1 - other.y1).abs() <= GEOM_TOL
    }

    /// Positive-area overlap.
    pub fn overlaps(&self, other: &Rect) -> bool {
        overlap_len(self.x0, self.x1, other.x0, other.x1) > GEOM_TOL
            && overlap_len(self.y0, self.y1, other.y0, other.y1) > GEOM_TOL
    }

    /// Overlap or a shared edge segment of positive length.
    pub fn touches(&self, other: &Rect) -> bool {
        let ox = overlap_len(self.x0, self.x1, other.x0, other.x1);
        let oy = overlap_len(self.y0, self.y1, other.y0, other.y1);
        (ox > GEOM_TOL && oy >= -GEOM_TOL) || (oy > GEOM_TOL && ox >= -GEOM_TOL)
    }
}

fn overlap_len(a0: f64, a1: f64, b0: f64, b1: f64) -> f64 {
    a1.min(b1) - a0.max(b0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartKind {
    Fixed,
    HotUnderarm,
    ColdUnderarm,
    Flexure,
    Connector,
    Jaw,
}

impl PartKind {
    pub fn label(self) -> &'static str {
        match self {
            PartKind::Fixed => "fixed",
            PartKind::HotUnderarm => "hot_underarm",
            PartKind::ColdUnderarm => "cold_underarm",
            PartKind::Flexure => "flexure",
            PartKind::Connector => "connector",
            PartKind::Jaw => "jaw",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanPart {
    pub kind: PartKind,
    pub arm: Option<ArmSide>,
    pub rect: Rect,
}

impl PlanPart {
    pub fn label(&self) -> String {
        match self.arm {
            Some(arm) => format!("{}_{}", self.kind.label(), arm.label()),
            None => self.kind.label().to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeaterSegment {
    pub arm: ArmSide,
    pub rect: Rect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminalPad {
    pub id: String,
    pub arm: ArmSide,
    pub polarity: Polarity,
    pub rect: Rect,
}

/// Plan-view parameters. Only the envelope, arm length and opening gap are
/// fixed by the device; the rest are free defaults that fill the 460 x 200 um
/// footprint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanParams {
    pub footprint_length: f64,
    pub footprint_width: f64,
    pub free_arm_length: f64,
    pub tip_gap_open: f64,
    /// Length of the hot and cold underarms measured from the anchor edge.
    pub underarm_length: f64,
    pub connector_length: f64,
    pub hot_arm_width: f64,
    pub cold_arm_width: f64,
    pub jaw_width: f64,
    pub flexure_length: f64,
    pub flexure_width: f64,
    pub trace_width: f64,
    /// Lateral gap between the two heater legs. The legs run along the
    /// cold-side edge of the hot underarm.
    pub leg_gap: f64,
    /// Extent of the heater legs along the hot underarm, from the anchor edge.
    pub heater_length: f64,
    pub pad_length: f64,
    /// Length of the gripping face at the end of each jaw.
    pub tip_length: f64,
}

impl Default for PlanParams {
    fn default() -> Self {
        PlanParams {
            footprint_length: 460.0,
            footprint_width: 200.0,
            free_arm_length: 400.0,
            tip_gap_open: 20.0,
            underarm_length: 240.0,
            connector_length: 20.0,
            hot_arm_width: 60.0,
            cold_arm_width: 25.0,
            jaw_width: 20.0,
            flexure_length: 40.0,
            flexure_width: 10.0,
            trace_width: 10.0,
            leg_gap: 10.0,
            heater_length: 100.0,
            pad_length: 20.0,
            tip_length: 10.0,
        }
    }
}

/// Layer-stack parameters shared by all metal placements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StackParams {
    pub oxide_material: String,
    pub polymer_material: String,
    pub metal_material: String,
    pub oxide_thickness: f64,
    /// Total polymer thickness (split in two around a buried conductor).
    pub polymer_thickness: f64,
    pub metal_thickness: f64,
}

impl Default for StackParams {
    fn default() -> Self {
        StackParams {
            oxide_material: SIO2.into(),
            polymer_material: SU8.into(),
            metal_material: GOLD.into(),
            oxide_thickness: 2.0,
            polymer_thickness: 20.0,
            metal_thickness: 0.3,
        }
    }
}

/// Numeric overrides keyed by parameter name (plan or stack).
pub type DesignOverrides = BTreeMap<String, f64>;

/// Names accepted in a [`DesignOverrides`] map.
pub const OVERRIDE_KEYS: &[&str] = &[
    "footprint_length",
    "footprint_width",
    "free_arm_length",
    "tip_gap_open",
    "underarm_length",
    "connector_length",
    "hot_arm_width",
    "cold_arm_width",
    "jaw_width",
    "flexure_length",
    "flexure_width",
    "trace_width",
    "leg_gap",
    "heater_length",
    "pad_length",
    "tip_length",
    "oxide_thickness",
    "polymer_thickness",
    "metal_thickness",
    "metal_offset",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GripperDesign {
    pub id: String,
    pub plan: PlanParams,
    pub stack_params: StackParams,
    pub parts: Vec<PlanPart>,
    pub heater: Vec<HeaterSegment>,
    pub pads: Vec<TerminalPad>,
    /// Bottom to top.
    pub stack: Vec<LayerSpec>,
    pub metal_placement: MetalPlacement,
    pub materials: MaterialLibrary,
}

fn apply_overrides(
    plan: &mut PlanParams,
    stack: &mut StackParams,
    offset: &mut f64,
    overrides: &DesignOverrides,
) -> Result<()> {
    let mut unknown = Vec::new();
    for (key, &value) in overrides {
        let slot = match key.as_str() {
            "footprint_length" => &mut plan.footprint_length,
            "footprint_width" => &mut plan.footprint_width,
            "free_arm_length" => &mut plan.free_arm_length,
            "tip_gap_open" => &mut plan.tip_gap_open,
            "underarm_length" => &mut plan.underarm_length,
            "connector_length" => &mut plan.connector_length,
            "hot_arm_width" => &mut plan.hot_arm_width,
            "cold_arm_width" => &mut plan.cold_arm_width,
            "jaw_width" => &mut plan.jaw_width,
            "flexure_length" => &mut plan.flexure_length,
            "flexure_width" => &mut plan.flexure_width,
            "trace_width" => &mut plan.trace_width,
            "leg_gap" => &mut plan.leg_gap,
            "heater_length" => &mut plan.heater_length,
            "pad_length" => &mut plan.pad_length,
            "tip_length" => &mut plan.tip_length,
            "oxide_thickness" => &mut stack.oxide_thickness,
            "polymer_thickness" => &mut stack.polymer_thickness,
            "metal_thickness" => &mut stack.metal_thickness,
            "metal_offset" => offset,
            _ => {
                unknown.push(format!("unknown design parameter '{key}'"));
                continue;
            }
        };
        *slot = value;
    }
    if unknown.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidDesign(unknown))
    }
}

/// Model 1: conductor on both faces of a single polymer core.
pub fn build_model1(overrides: Option<&DesignOverrides>) -> Result<GripperDesign> {
    build("model1", MetalPlacement::BothFaces, overrides)
}

/// Model 2: one conductor buried between two equal polymer layers.
pub fn build_model2(overrides: Option<&DesignOverrides>) -> Result<GripperDesign> {
    build("model2", MetalPlacement::Midplane, overrides)
}

/// Single buried conductor shifted `offset` um above the polymer midplane.
pub fn build_parametric(offset: f64, overrides: Option<&DesignOverrides>) -> Result<GripperDesign> {
    build("parametric", MetalPlacement::ParametricOffset(offset), overrides)
}

/// Buried conductor placed so that `fraction` of the polymer lies beneath it.
pub fn build_split(fraction: f64, overrides: Option<&DesignOverrides>) -> Result<GripperDesign> {
    let polymer = overrides
        .and_then(|o| o.get("polymer_thickness").copied())
        .unwrap_or_else(|| StackParams::default().polymer_thickness);
    build_parametric((fraction - 0.5) * polymer, overrides)
}

fn build(
    id: &str,
    placement: MetalPlacement,
    overrides: Option<&DesignOverrides>,
) -> Result<GripperDesign> {
    build_design(id, placement, overrides, MaterialLibrary::builtin())
}

/// Any placement with overrides on top of the defaults and its own
/// material library.
pub fn build_design(
    id: &str,
    placement: MetalPlacement,
    overrides: Option<&DesignOverrides>,
    materials: MaterialLibrary,
) -> Result<GripperDesign> {
    let mut plan = PlanParams::default();
    let mut stack_params = StackParams::default();
    let mut offset = match placement {
        MetalPlacement::ParametricOffset(o) => o,
        _ => 0.0,
    };
    if let Some(ov) = overrides {
        apply_overrides(&mut plan, &mut stack_params, &mut offset, ov)?;
        if ov.contains_key("metal_offset") && !matches!(placement, MetalPlacement::ParametricOffset(_)) {
            return Err(Error::InvalidDesign(vec![
                "metal_offset only applies to parametric designs".into(),
            ]));
        }
    }
    let placement = match placement {
        MetalPlacement::ParametricOffset(_) => MetalPlacement::ParametricOffset(offset),
        p => p,
    };
    assemble_design(id, plan, stack_params, placement, materials)
}

/// Builds the polygons and stack from resolved parameters and validates them.
pub fn assemble_design(
    id: &str,
    plan: PlanParams,
    stack_params: StackParams,
    placement: MetalPlacement,
    materials: MaterialLibrary,
) -> Result<GripperDesign> {
    let mut violations = check_params(&plan, &stack_params, placement);
    if !violations.is_empty() {
        return Err(Error::InvalidDesign(violations));
    }
    let (parts, heater, pads) = plan_polygons(&plan);
    let stack = layer_stack(&stack_params, placement);
    let design = GripperDesign {
        id: id.to_string(),
        plan,
        stack_params,
        parts,
        heater,
        pads,
        stack,
        metal_placement: placement,
        materials,
    };
    violations = validate_design(&design);
    if violations.is_empty() {
        Ok(design)
    } else {
        Err(Error::InvalidDesign(violations))
    }
}

fn check_params(p: &PlanParams, s: &StackParams, placement: MetalPlacement) -> Vec<String> {
    let mut v = Vec::new();
    let named = [
        ("footprint_length", p.footprint_length),
        ("footprint_width", p.footprint_width),
        ("free_arm_length", p.free_arm_length),
        ("tip_gap_open", p.tip_gap_open),
        ("underarm_length", p.underarm_length),
        ("connector_length", p.connector_length),
        ("hot_arm_width", p.hot_arm_width),
        ("cold_arm_width", p.cold_arm_width),
        ("jaw_width", p.jaw_width),
        ("flexure_length", p.flexure_length),
        ("flexure_width", p.flexure_width),
        ("trace_width", p.trace_width),
        ("leg_gap", p.leg_gap),
        ("heater_length", p.heater_length),
        ("pad_length", p.pad_length),
        ("tip_length", p.tip_length),
        ("oxide_thickness", s.oxide_thickness),
        ("polymer_thickness", s.polymer_thickness),
        ("metal_thickness", s.metal_thickness),
    ];
    for (name, value) in named {
        if !(value > 0.0 && value.is_finite()) {
            v.push(format!("{name} must be > 0 (got {value})"));
        }
    }
    if !v.is_empty() {
        return v;
    }
    let half = p.footprint_width / 2.0;
    let root = p.footprint_length - p.free_arm_length;
    if !(p.free_arm_length < p.footprint_length) {
        v.push("free_arm_length must be < footprint_length".into());
    } else if !(root > p.pad_length) {
        v.push("anchor length (footprint_length - free_arm_length) must exceed pad_length".into());
    }
    let jaw_len = p.free_arm_length - p.underarm_length - p.connector_length;
    if !(jaw_len > p.tip_length) {
        v.push("jaw length (free_arm_length - underarm_length - connector_length) must exceed tip_length".into());
    }
    if !(p.flexure_length < p.underarm_length) {
        v.push("flexure_length must be < underarm_length".into());
    }
    if !(p.flexure_width <= p.cold_arm_width) {
        v.push("flexure_width must be <= cold_arm_width".into());
    }
    let gap = p.tip_gap_open / 2.0;
    if !(gap + p.cold_arm_width < half - p.hot_arm_width) {
        v.push("hot and cold underarms overlap: tip_gap_open/2 + cold_arm_width must be < footprint_width/2 - hot_arm_width".into());
    }
    if !(gap + p.jaw_width <= half) {
        v.push("jaw does not fit inside the footprint".into());
    }
    if !(p.hot_arm_width >= 2.0 * p.trace_width + p.leg_gap) {
        v.push("heater does not fit: hot_arm_width must be >= 2 * trace_width + leg_gap".into());
    }
    if !(p.heater_length <= p.underarm_length && p.heater_length > p.trace_width) {
        v.push("heater_length must lie in (trace_width, underarm_length]".into());
    }
    if let MetalPlacement::ParametricOffset(o) = placement {
        let limit = s.polymer_thickness / 2.0;
        if !(o.abs() < limit) {
            v.push(format!("metal_offset must satisfy |offset| < {limit} (got {o})"));
        }
    }
    v
}

type Polygons = (Vec<PlanPart>, Vec<HeaterSegment>, Vec<TerminalPad>);

fn plan_polygons(p: &PlanParams) -> Polygons {
    let mid = p.footprint_width / 2.0;
    let half = p.footprint_width / 2.0;
    let root = p.footprint_length - p.free_arm_length;
    let gap = p.tip_gap_open / 2.0;
    let under_end = root + p.underarm_length;
    let conn_end = under_end + p.connector_length;

    let mut parts = vec![PlanPart {
        kind: PartKind::Fixed,
        arm: None,
        rect: Rect::new(0.0, root, 0.0, p.footprint_width),
    }];
    let mut heater = Vec::new();
    let mut pads = Vec::new();

    for arm in [ArmSide::Left, ArmSide::Right] {
        // Lateral band [a0, a1] measured outward from the midline.
        let band = |x0: f64, x1: f64, a0: f64, a1: f64| -> Rect {
            match arm {
                ArmSide::Left => Rect::new(x0, x1, mid + a0, mid + a1),
                ArmSide::Right => Rect::new(x0, x1, mid - a1, mid - a0),
            }
        };
        let hot_in = half - p.hot_arm_width;
        let cold_out = gap + p.cold_arm_width;
        let shapes = [
            (PartKind::HotUnderarm, band(root, under_end, hot_in, half)),
            (
                PartKind::Flexure,
                band(root, root + p.flexure_length, cold_out - p.flexure_width, cold_out),
            ),
            (
                PartKind::ColdUnderarm,
                band(root + p.flexure_length, under_end, gap, cold_out),
            ),
            (PartKind::Connector, band(under_end, conn_end, gap, half)),
            (
                PartKind::Jaw,
                band(conn_end, p.footprint_length, gap, gap + p.jaw_width),
            ),
        ];
        for (kind, rect) in shapes {
            parts.push(PlanPart {
                kind,
                arm: Some(arm),
                rect,
            });
        }

        let tw = p.trace_width;
        let heat_end = root + p.heater_length;
        let far = hot_in + 2.0 * tw + p.leg_gap;
        let outer = band(0.0, heat_end, far - tw, far);
        let inner = band(0.0, heat_end, hot_in, hot_in + tw);
        let cross = band(heat_end - tw, heat_end, hot_in + tw, far - tw);
        for rect in [outer, cross, inner] {
            heater.push(HeaterSegment { arm, rect });
        }
        pads.push(TerminalPad {
            id: format!("{}_supply", arm.label()),
            arm,
            polarity: Polarity::Supply,
            rect: band(0.0, p.pad_length, far - tw, far),
        });
        pads.push(TerminalPad {
            id: format!("{}_return", arm.label()),
            arm,
            polarity: Polarity::Return,
            rect: band(0.0, p.pad_length, hot_in, hot_in + tw),
        });
    }
    (parts, heater, pads)
}

fn layer_stack(s: &StackParams, placement: MetalPlacement) -> Vec<LayerSpec> {
    let layer = |material: &str, thickness: f64, role: LayerRole| LayerSpec {
        material: material.to_string(),
        thickness,
        role,
    };
    let oxide = layer(&s.oxide_material, s.oxide_thickness, LayerRole::SubstrateOxide);
    let metal = layer(&s.metal_material, s.metal_thickness, LayerRole::Conductor);
    let polymer = |t: f64| layer(&s.polymer_material, t, LayerRole::StructuralPolymer);
    match placement {
        MetalPlacement::BothFaces => vec![
            oxide,
            metal.clone(),
            polymer(s.polymer_thickness),
            metal,
        ],
        MetalPlacement::Midplane => vec![
            oxide,
            polymer(s.polymer_thickness / 2.0),
            metal,
            polymer(s.polymer_thickness / 2.0),
        ],
        MetalPlacement::ParametricOffset(o) => vec![
            oxide,
            polymer(s.polymer_thickness / 2.0 + o),
            metal,
            polymer(s.polymer_thickness / 2.0 - o),
        ],
    }
}

impl GripperDesign {
    pub fn midline(&self) -> f64 {
        self.plan.footprint_width / 2.0
    }

    pub fn tip_gap_open(&self) -> f64 {
        self.plan.tip_gap_open
    }

    /// Anchor edge, where the free arms start.
    pub fn root_x(&self) -> f64 {
        self.plan.footprint_length - self.plan.free_arm_length
    }

    /// Sum of all layer thicknesses (the stack over the anchor).
    pub fn total_thickness(&self) -> f64 {
        self.stack.iter().map(|l| l.thickness).sum()
    }

    /// Stack thickness of the released arms (everything but the oxide).
    pub fn free_arm_thickness(&self) -> f64 {
        self.stack
            .iter()
            .filter(|l| l.role != LayerRole::SubstrateOxide)
            .map(|l| l.thickness)
            .sum()
    }

    pub fn fixed_rect(&self) -> Rect {
        self.parts
            .iter()
            .find(|p| p.kind == PartKind::Fixed)
            .map(|p| p.rect)
            .unwrap_or_else(|| Rect::new(0.0, self.root_x(), 0.0, self.plan.footprint_width))
    }

    /// Anchor footprint area, um^2.
    pub fn anchor_area(&self) -> f64 {
        self.fixed_rect().area()
    }

    /// Center of the gripping faces in plan, (x, y).
    pub fn grip_center(&self) -> (f64, f64) {
        (
            self.plan.footprint_length - self.plan.tip_length / 2.0,
            self.midline(),
        )
    }

    /// Boundary representation consumed by the mesher.
    pub fn to_block_model(&self) -> Result<BlockModel> {
        let mut model = BlockModel::default();
        let polymer = self
            .stack
            .iter()
            .find(|l| l.role == LayerRole::StructuralPolymer)
            .map(|l| l.material.clone())
            .ok_or_else(|| Error::InvalidDesign(vec!["stack has no structural polymer layer".into()]))?;
        let polymer_region = model.region(Region {
            material: polymer,
            role: LayerRole::StructuralPolymer,
        });

        let part_ids: Vec<usize> = self
            .parts
            .iter()
            .map(|p| {
                model.part(PartInfo {
                    name: p.label(),
                    free: p.kind != PartKind::Fixed,
                })
            })
            .collect();
        let heater_part = |arm: ArmSide| -> usize {
            self.parts
                .iter()
                .position(|p| p.kind == PartKind::HotUnderarm && p.arm == Some(arm))
                .map(|i| part_ids[i])
                .unwrap_or(0)
        };

        let mut z = 0.0;
        let mut free_bottom = 0.0;
        for layer in &self.stack {
            let (z0, z1) = (z, z + layer.thickness);
            z = z1;
            let region = model.region(Region {
                material: layer.material.clone(),
                role: layer.role,
            });
            match layer.role {
                LayerRole::SubstrateOxide => {
                    free_bottom = z1;
                    for (part, &pid) in self.parts.iter().zip(&part_ids) {
                        if part.kind == PartKind::Fixed {
                            model.blocks.push(Block::new(part.rect, z0, z1, region, pid));
                        }
                    }
                }
                LayerRole::StructuralPolymer => {
                    for (part, &pid) in self.parts.iter().zip(&part_ids) {
                        model.blocks.push(Block::new(part.rect, z0, z1, region, pid));
                    }
                }
                LayerRole::Conductor => {
                    // Polymer fills the conductor level around the trace;
                    // later blocks take precedence in the mesher.
                    for (part, &pid) in self.parts.iter().zip(&part_ids) {
                        model
                            .blocks
                            .push(Block::new(part.rect, z0, z1, polymer_region, pid));
                    }
                    for seg in &self.heater {
                        split_at_root(seg.rect, self.root_x(), |r, on_anchor| {
                            let pid = if on_anchor { part_ids[0] } else { heater_part(seg.arm) };
                            model.blocks.push(Block::new(r, z0, z1, region, pid));
                        });
                    }
                }
            }
        }
        let top = z;

        let fixed = self.fixed_rect();
        model.fixed.push(FaceSelector {
            axis: 2,
            positive: false,
            coord: 0.0,
            lo: [fixed.x0, fixed.y0],
            hi: [fixed.x1, fixed.y1],
        });
        for pad in &self.pads {
            model.terminals.push(TerminalSpec {
                id: pad.id.clone(),
                arm: pad.arm,
                polarity: pad.polarity,
                lo: [pad.rect.x0, pad.rect.y0, 0.0],
                hi: [pad.rect.x1, pad.rect.y1, top],
            });
        }
        let (_, mid) = self.grip_center();
        let gap = self.plan.tip_gap_open / 2.0;
        let x0 = self.plan.footprint_length - self.plan.tip_length;
        let x1 = self.plan.footprint_length;
        for arm in [ArmSide::Left, ArmSide::Right] {
            model.tips.push(TipSpec {
                side: arm,
                selector: FaceSelector {
                    axis: 1,
                    // Left jaw faces -y, right jaw faces +y.
                    positive: arm == ArmSide::Right,
                    coord: mid + arm.sign() * gap,
                    lo: [x0, free_bottom],
                    hi: [x1, top],
                },
            });
        }
        model.midline = Some(mid);
        Ok(model)
    }
}

/// Splits a heater rectangle at the anchor edge so anchor and arm pieces get
/// their own part labels.
fn split_at_root(r: Rect, root: f64, mut emit: impl FnMut(Rect, bool)) {
    if r.x0 < root - GEOM_TOL && r.x1 > root + GEOM_TOL {
        emit(Rect::new(r.x0, root, r.y0, r.y1), true);
        emit(Rect::new(root, r.x1, r.y0, r.y1), false);
    } else {
        emit(r, r.x1 <= root + GEOM_TOL);
    }
}

/// One entry per violated invariant; empty for a usable design.
pub fn validate_design(d: &GripperDesign) -> Vec<String> {
    let mut v = Vec::new();
    let p = &d.plan;
    if !(p.tip_gap_open > 0.0) {
        v.push("tip_gap_open must be > 0".into());
    }
    if !(p.free_arm_length > 0.0) {
        v.push("free_arm_length must be > 0".into());
    }
    if !(p.free_arm_length < p.footprint_length) {
        v.push("free_arm_length must be < footprint_length".into());
    }
    if d.stack.is_empty() {
        v.push("layer stack is empty".into());
    }
    for (i, layer) in d.stack.iter().enumerate() {
        if !(layer.thickness > 0.0) {
            v.push(format!("layer {i} ({}) thickness must be > 0", layer.material));
        }
        match d.materials.get(&layer.material) {
            Err(_) => v.push(format!("layer {i} references unknown material '{}'", layer.material)),
            Ok(m) => {
                if layer.role == LayerRole::Conductor && m.electrical_conductivity.is_none() {
                    v.push(format!(
                        "conductor layer {i} material '{}' has no electrical conductivity",
                        layer.material
                    ));
                }
                for issue in crate::materials::validate_material(m) {
                    v.push(format!("material '{}': {issue}", m.name));
                }
            }
        }
    }
    if !d.stack.iter().any(|l| l.role == LayerRole::Conductor) {
        v.push("stack has no conductor layer".into());
    }
    for part in &d.parts {
        if part.rect.is_degenerate() {
            v.push(format!("degenerate polygon '{}'", part.label()));
        }
    }

    for arm in [ArmSide::Left, ArmSide::Right] {
        let trace: Vec<Rect> = d
            .heater
            .iter()
            .filter(|s| s.arm == arm)
            .map(|s| s.rect)
            .collect();
        if trace.is_empty() {
            v.push(format!("{} arm has no heater trace", arm.label()));
            continue;
        }
        if !rects_connected(&trace) {
            v.push(format!("heater trace not connected ({} arm)", arm.label()));
        }
        let pads: Vec<&TerminalPad> = d.pads.iter().filter(|p| p.arm == arm).collect();
        let touching = pads
            .iter()
            .filter(|pad| trace.iter().any(|r| r.overlaps(&pad.rect)))
            .count();
        if pads.len() != 2 || touching != 2 {
            v.push(format!(
                "heater trace must touch exactly two terminal pads ({} arm has {touching})",
                arm.label()
            ));
        }
        let polarities: Vec<Polarity> = pads.iter().map(|p| p.polarity).collect();
        if pads.len() == 2 && !(polarities.contains(&Polarity::Supply) && polarities.contains(&Polarity::Return)) {
            v.push(format!("{} arm needs one supply and one return pad", arm.label()));
        }
    }

    if !mirror_symmetric(d) {
        v.push("arms not mirror-symmetric".into());
    }
    v
}

fn rects_connected(rects: &[Rect]) -> bool {
    let mut seen = vec![false; rects.len()];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for j in 0..rects.len() {
            if !seen[j] && rects[i].touches(&rects[j]) {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

fn mirror_symmetric(d: &GripperDesign) -> bool {
    let mid = d.midline();
    let parts_ok = d.parts.iter().all(|part| {
        let image = part.rect.mirror_y(mid);
        let arm = part.arm.map(ArmSide::mirrored);
        d.parts
            .iter()
            .any(|q| q.kind == part.kind && q.arm == arm && q.rect.approx_eq(&image))
    });
    let heater_ok = d.heater.iter().all(|seg| {
        let image = seg.rect.mirror_y(mid);
        d.heater
            .iter()
            .any(|q| q.arm == seg.arm.mirrored() && q.rect.approx_eq(&image))
    });
    let pads_ok = d.pads.iter().all(|pad| {
        let image = pad.rect.mirror_y(mid);
        d.pads.iter().any(|q| {
            q.arm == pad.arm.mirrored() && q.polarity == pad.polarity && q.rect.approx_eq(&image)
        })
    });
    parts_ok && heater_ok && pads_ok
}

#[cfg(test)]
mod tests {
    use super::*;

    fn thicknesses(d: &GripperDesign) -> Vec<f64> {
        d.stack.iter().map(|l| l.thickness).collect()
    }

    #[test]
    fn model1_stack_and_gap() {
        let d = build_model1(None).unwrap();
        assert_eq!(thicknesses(&d), vec![2.0, 0.3, 20.0, 0.3]);
        assert!((d.total_thickness() - 22.6).abs() < 1e-12);
        assert!((d.free_arm_thickness() - 20.6).abs() < 1e-12);
        assert_eq!(d.tip_gap_open(), 20.0);
        assert_eq!(d.metal_placement, MetalPlacement::BothFaces);
        assert!(validate_design(&d).is_empty());
    }

    #[test]
    fn model1_envelope() {
        let d = build_model1(None).unwrap();
        let (mut xmax, mut ymin, mut ymax) = (0.0f64, f64::MAX, 0.0f64);
        for p in &d.parts {
            xmax = xmax.max(p.rect.x1);
            ymin = ymin.min(p.rect.y0);
            ymax = ymax.max(p.rect.y1);
        }
        assert_eq!((xmax, ymin, ymax), (460.0, 0.0, 200.0));
        assert_eq!(d.plan.free_arm_length, 400.0);
        // Gap between the jaws is the opening distance.
        let jaw = |arm| {
            d.parts
                .iter()
                .find(|p| p.kind == PartKind::Jaw && p.arm == Some(arm))
                .unwrap()
                .rect
        };
        assert_eq!(jaw(ArmSide::Left).y0 - jaw(ArmSide::Right).y1, 20.0);
    }

    #[test]
    fn zero_free_arm_is_rejected() {
        let ov = DesignOverrides::from([("free_arm_length".to_string(), 0.0)]);
        assert!(matches!(build_model1(Some(&ov)), Err(Error::InvalidDesign(_))));
    }

    #[test]
    fn unknown_override_is_rejected() {
        let ov = DesignOverrides::from([("colour".to_string(), 1.0)]);
        let err = build_model1(Some(&ov)).unwrap_err();
        assert!(err.to_string().contains("colour"));
    }

    #[test]
    fn model2_single_buried_conductor() {
        let d = build_model2(None).unwrap();
        assert_eq!(thicknesses(&d), vec![2.0, 10.0, 0.3, 10.0]);
        let conductors: Vec<usize> = d
            .stack
            .iter()
            .enumerate()
            .filter(|(_, l)| l.role == LayerRole::Conductor)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(conductors, vec![2]);
        assert_eq!(d.stack[1].role, LayerRole::StructuralPolymer);
        assert_eq!(d.stack[3].role, LayerRole::StructuralPolymer);
    }

    #[test]
    fn models_share_plan_view() {
        let a = build_model1(None).unwrap();
        let b = build_model2(None).unwrap();
        assert_eq!(a.parts, b.parts);
        assert_eq!(a.heater, b.heater);
        assert_eq!(a.pads, b.pads);
        assert_eq!(a.plan, b.plan);
        assert_ne!(a.stack, b.stack);
        assert_ne!(a.metal_placement, b.metal_placement);
    }

    #[test]
    fn thicker_metal_is_additive() {
        let base = build_model2(None).unwrap();
        let ov = DesignOverrides::from([("metal_thickness".to_string(), 0.6)]);
        let d = build_model2(Some(&ov)).unwrap();
        assert!(validate_design(&d).is_empty());
        assert!((d.total_thickness() - base.total_thickness() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn disconnected_heater_is_reported() {
        let mut d = build_model1(None).unwrap();
        // Drop the crossbar joining the two legs of the left trace.
        let idx = d
            .heater
            .iter()
            .position(|s| s.arm == ArmSide::Left && s.rect.x1 - s.rect.x0 < 11.0)
            .unwrap();
        d.heater.remove(idx);
        let report = validate_design(&d);
        assert!(report.iter().any(|m| m.starts_with("heater trace not connected")), "{report:?}");
    }

    #[test]
    fn asymmetric_arms_are_reported() {
        let mut d = build_model1(None).unwrap();
        let jaw = d
            .parts
            .iter_mut()
            .find(|p| p.kind == PartKind::Jaw && p.arm == Some(ArmSide::Left))
            .unwrap();
        jaw.rect.y1 += 5.0;
        assert_eq!(validate_design(&d), vec!["arms not mirror-symmetric".to_string()]);
    }

    #[test]
    fn mirror_image_maps_polygons_onto_themselves() {
        for d in [build_model1(None).unwrap(), build_model2(None).unwrap()] {
            let mid = d.midline();
            for part in &d.parts {
                let image = part.rect.mirror_y(mid);
                assert!(d.parts.iter().any(|q| q.rect == image), "{}", part.label());
            }
        }
    }

    #[test]
    fn split_fraction_maps_to_offset() {
        let d = build_split(0.25, None).unwrap();
        assert_eq!(thicknesses(&d), vec![2.0, 5.0, 0.3, 15.0]);
        let mid = build_split(0.5, None).unwrap();
        assert_eq!(thicknesses(&mid), thicknesses(&build_model2(None).unwrap()));
        assert!(build_split(1.0, None).is_err());
    }

    #[test]
    fn conductor_without_conductivity_is_reported() {
        let mut d = build_model1(None).unwrap();
        d.materials.materials.get_mut(GOLD).unwrap().electrical_conductivity = None;
        let report = validate_design(&d);
        assert!(report.iter().any(|m| m.contains("no electrical conductivity")));
    }
}
