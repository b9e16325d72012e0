//! Template object catalog and dataset splits.
//!
//! Objects are assembled from a pole-shaped rack (modeled as a uniform rod),
//! up to two weight disks press-fit into slots along the rack, and a handle
//! whose surface material sets the grip friction class. Mass, center of mass
//! and moment of inertia follow from the composite-body formulas
//!
//! ```text
//! com = Σ mᵢ rᵢ / Σ mᵢ        I = Σ (Iᵢ + mᵢ rᵢ²)
//! ```
//!
//! with everything measured about the grip pivot axis.

use crate::error::{Error, Result};
use std::collections::BTreeSet;
use std::fmt;

/// Rack mass in grams.
pub const RACK_MASS_G: f64 = 15.6;
/// Rack modeled as a uniform rod of this length (mm).
pub const ROD_LENGTH_MM: f64 = 150.0;
/// Near end of the rod, measured from the grip pivot (mm). The handle
/// stands the rod off the pivot; a rod starting at the pivot would put the
/// bare-rack center of mass below the catalog range.
pub const ROD_OFFSET_MM: f64 = 20.0;
/// Disk masses in grams.
pub const DISK_MASSES_G: [f64; 3] = [3.7, 7.3, 14.5];
/// Disk slot positions along the rack, from the pivot (mm).
pub const DISK_SLOTS_MM: [f64; 3] = [60.0, 95.0, 130.0];

/// Handle surface material, which sets the kinetic friction coefficient
/// at the grip contact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FrictionClass {
    Foam,
    SlickTape,
    Plastic,
}

impl FrictionClass {
    pub const ALL: [FrictionClass; 3] = [
        FrictionClass::Foam,
        FrictionClass::SlickTape,
        FrictionClass::Plastic,
    ];

    /// Kinetic friction coefficient of the handle surface.
    pub fn mu_kinetic(self) -> f64 {
        match self {
            FrictionClass::Foam => 0.9,
            FrictionClass::SlickTape => 0.3,
            FrictionClass::Plastic => 0.6,
        }
    }

    /// Stable class index, 0..3.
    pub fn index(self) -> usize {
        match self {
            FrictionClass::Foam => 0,
            FrictionClass::SlickTape => 1,
            FrictionClass::Plastic => 2,
        }
    }

    pub fn from_index(i: usize) -> Result<Self> {
        Self::ALL
            .get(i)
            .copied()
            .ok_or_else(|| Error::InvalidArg(format!("friction class index {i} out of range")))
    }
}

impl fmt::Display for FrictionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FrictionClass::Foam => "foam",
            FrictionClass::SlickTape => "slick_tape",
            FrictionClass::Plastic => "plastic",
        };
        f.write_str(s)
    }
}

/// Ground-truth physical parameters of one assembled object.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectSpec {
    pub id: u32,
    /// Total mass in grams.
    pub mass_g: f64,
    /// Center of mass distance from the grip pivot, millimeters.
    pub com_mm: f64,
    /// Moment of inertia about the grip pivot axis, g·m².
    pub moi_gm2: f64,
    pub friction: FrictionClass,
}

impl ObjectSpec {
    /// Mass in kilograms.
    pub fn mass_kg(&self) -> f64 {
        self.mass_g * 1e-3
    }

    /// Center of mass in meters.
    pub fn com_m(&self) -> f64 {
        self.com_mm * 1e-3
    }

    /// Pivot-axis moment of inertia in kg·m².
    pub fn moi_kgm2(&self) -> f64 {
        self.moi_gm2 * 1e-3
    }

    /// Gravity torque lever arm m·g·r in N·m (g = 9.81 m/s²).
    pub fn gravity_torque_nm(&self) -> f64 {
        self.mass_kg() * 9.81 * self.com_m()
    }
}

/// How one object is put together from the shared components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Assembly {
    /// Bare rack, no disks.
    RackOnly,
    /// One disk (index into `DISK_MASSES_G`) in one slot (index into
    /// `DISK_SLOTS_MM`).
    SingleDisk { disk: usize, slot: usize },
    /// The 7.3 g disk in the middle slot plus the 14.5 g disk in the far
    /// slot; the heaviest assembly in the catalog.
    DoubleDisk,
}

impl Assembly {
    /// All 11 assemblies per friction class, in catalog order.
    pub fn all() -> Vec<Assembly> {
        let mut v = vec![Assembly::RackOnly];
        for disk in 0..DISK_MASSES_G.len() {
            for slot in 0..DISK_SLOTS_MM.len() {
                v.push(Assembly::SingleDisk { disk, slot });
            }
        }
        v.push(Assembly::DoubleDisk);
        v
    }

    /// Point-mass placements (grams, mm from pivot) of the disks.
    pub fn disk_placements(self) -> Vec<(f64, f64)> {
        match self {
            Assembly::RackOnly => vec![],
            Assembly::SingleDisk { disk, slot } => {
                vec![(DISK_MASSES_G[disk], DISK_SLOTS_MM[slot])]
            }
            Assembly::DoubleDisk => vec![
                (DISK_MASSES_G[1], DISK_SLOTS_MM[1]),
                (DISK_MASSES_G[2], DISK_SLOTS_MM[2]),
            ],
        }
    }
}

/// Component inventory shared by every object.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateCatalog {
    pub rack_mass_g: f64,
    pub disk_masses_g: Vec<f64>,
    pub disk_slots_mm: Vec<f64>,
    pub specs: Vec<ObjectSpec>,
}

/// Composite-body sum over point masses (grams, mm): returns
/// (total mass g, com mm, pivot moment of inertia g·m²).
pub fn composite_point_masses(parts: &[(f64, f64)]) -> (f64, f64, f64) {
    let mass: f64 = parts.iter().map(|(m, _)| m).sum();
    let first_moment: f64 = parts.iter().map(|(m, r)| m * r).sum();
    let com = first_moment / mass;
    // g·mm² → g·m²
    let moi: f64 = parts.iter().map(|(m, r)| m * r * r).sum::<f64>() * 1e-6;
    (mass, com, moi)
}

/// Uniform rod from `a` to `b` mm: (com mm, pivot moment g·m²).
fn rod_properties(mass_g: f64, a_mm: f64, b_mm: f64) -> (f64, f64) {
    let com = 0.5 * (a_mm + b_mm);
    // ∫ r² dm over the rod = m (b³ − a³) / (3 (b − a)), in g·mm² → g·m².
    let moi = mass_g * (b_mm.powi(3) - a_mm.powi(3)) / (3.0 * (b_mm - a_mm)) * 1e-6;
    (com, moi)
}

fn assemble(id: u32, friction: FrictionClass, assembly: Assembly) -> ObjectSpec {
    let (rod_com, rod_moi) = rod_properties(RACK_MASS_G, ROD_OFFSET_MM, ROD_OFFSET_MM + ROD_LENGTH_MM);
    let mut mass = RACK_MASS_G;
    let mut first_moment = RACK_MASS_G * rod_com;
    let mut moi = rod_moi;
    for (m, r) in assembly.disk_placements() {
        mass += m;
        first_moment += m * r;
        moi += m * r * r * 1e-6;
    }
    ObjectSpec {
        id,
        mass_g: mass,
        com_mm: first_moment / mass,
        moi_gm2: moi,
        friction,
    }
}

/// Build the full 33-object catalog: 3 friction classes × 11 assemblies.
pub fn build_catalog() -> TemplateCatalog {
    let mut specs = Vec::with_capacity(33);
    for friction in FrictionClass::ALL {
        for assembly in Assembly::all() {
            let id = specs.len() as u32;
            specs.push(assemble(id, friction, assembly));
        }
    }
    TemplateCatalog {
        rack_mass_g: RACK_MASS_G,
        disk_masses_g: DISK_MASSES_G.to_vec(),
        disk_slots_mm: DISK_SLOTS_MM.to_vec(),
        specs,
    }
}

impl TemplateCatalog {
    pub fn spec(&self, id: u32) -> Result<&ObjectSpec> {
        self.specs
            .get(id as usize)
            .ok_or_else(|| Error::InvalidArg(format!("object id {id} not in catalog")))
    }

    /// CSV table of the catalog: id, friction, mass_g, com_mm, moi_gm2.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("id,friction,mass_g,com_mm,moi_gm2\n");
        for spec in &self.specs {
            s.push_str(&format!(
                "{},{},{:.4},{:.4},{:.6}\n",
                spec.id, spec.friction, spec.mass_g, spec.com_mm, spec.moi_gm2
            ));
        }
        s
    }

    /// Id of the assembly `a` under friction class `f`.
    pub fn id_of(&self, f: FrictionClass, a: Assembly) -> u32 {
        let pos = Assembly::all().iter().position(|x| *x == a).unwrap();
        (f.index() * Assembly::all().len() + pos) as u32
    }
}

/// The 6 held-out assemblies for the unseen split, in the order used by the
/// embedding-space plots: two slick-tape light objects, then the near-slot
/// heavy pair, then the far-slot heavy pair. Positions 5 and 6 share an
/// assembly and differ only in handle material; positions 1 and 4 differ in
/// everything.
pub fn unseen_object_ids(catalog: &TemplateCatalog) -> Vec<u32> {
    use Assembly::SingleDisk;
    use FrictionClass::{Plastic, SlickTape};
    vec![
        catalog.id_of(SlickTape, SingleDisk { disk: 0, slot: 0 }),
        catalog.id_of(SlickTape, SingleDisk { disk: 0, slot: 2 }),
        catalog.id_of(SlickTape, SingleDisk { disk: 2, slot: 0 }),
        catalog.id_of(Plastic, SingleDisk { disk: 2, slot: 0 }),
        catalog.id_of(SlickTape, SingleDisk { disk: 2, slot: 2 }),
        catalog.id_of(Plastic, SingleDisk { disk: 2, slot: 2 }),
    ]
}

/// Trials recorded per object in the standard dataset.
pub const TRIALS_PER_OBJECT: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitMode {
    /// Train and test on every object, 90%/10% of the trials.
    Seen,
    /// Hold out 6 whole objects; train on the other 27.
    Unseen,
}

impl fmt::Display for SplitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitMode::Seen => "seen",
            SplitMode::Unseen => "unseen",
        })
    }
}

/// A resolved train/test partition over (object, trial) pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpec {
    pub mode: SplitMode,
    pub train_object_ids: BTreeSet<u32>,
    pub test_object_ids: BTreeSet<u32>,
    /// Fraction of each object's trials used for training (`Seen` only).
    pub per_object_train_fraction: f64,
}

/// Build a split. Both splits are fully determined by the catalog layout;
/// `_seed` is accepted for interface stability but unused.
pub fn make_split(catalog: &TemplateCatalog, mode: SplitMode, _seed: u64) -> SplitSpec {
    let all: BTreeSet<u32> = catalog.specs.iter().map(|s| s.id).collect();
    match mode {
        SplitMode::Seen => SplitSpec {
            mode,
            train_object_ids: all.clone(),
            test_object_ids: all,
            per_object_train_fraction: 0.9,
        },
        SplitMode::Unseen => {
            let test: BTreeSet<u32> = unseen_object_ids(catalog).into_iter().collect();
            let train: BTreeSet<u32> = all.difference(&test).copied().collect();
            SplitSpec {
                mode,
                train_object_ids: train,
                test_object_ids: test,
                per_object_train_fraction: 1.0,
            }
        }
    }
}

impl SplitSpec {
    /// Number of training trials per object for objects in the train set.
    pub fn train_trials_per_object(&self) -> usize {
        match self.mode {
            SplitMode::Seen => {
                (TRIALS_PER_OBJECT as f64 * self.per_object_train_fraction).round() as usize
            }
            SplitMode::Unseen => TRIALS_PER_OBJECT,
        }
    }

    /// Whether trial `trial_idx` of `object_id` belongs to the training set.
    /// In the seen split the last trials of every object are held out, which
    /// keeps the partition reproducible without extra state.
    pub fn is_train(&self, object_id: u32, trial_idx: usize) -> bool {
        match self.mode {
            SplitMode::Seen => trial_idx < self.train_trials_per_object(),
            SplitMode::Unseen => self.train_object_ids.contains(&object_id),
        }
    }

    pub fn is_test(&self, object_id: u32, trial_idx: usize) -> bool {
        match self.mode {
            SplitMode::Seen => !self.is_train(object_id, trial_idx),
            SplitMode::Unseen => self.test_object_ids.contains(&object_id),
        }
    }
}
