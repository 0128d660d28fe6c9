//! Seeded scenario generation and the instance file format.
//!
//! Instance files are TOML documents with a `format_version`, an optional echo
//! of the generating config (plus the RNG identifier), and exactly one of an
//! `[fpmt]` or `[mpft]` table.

use std::fs;
use std::io::Read;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fpmt::{FpmtInstance, FpmtTask, Participant};
use crate::geo::{distance, CoordMode, Location};
use crate::mpft::{Area, MpftInstance, MpftTask};

pub const FORMAT_VERSION: i64 = 1;
/// Identifier of the generator stored alongside the config echo.
pub const RNG_ID: &str = "chacha8";
/// Attempts at drawing area populations that cover total demand.
pub const POPULATION_RETRIES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemMode {
    Fpmt,
    Mpft,
}

impl ProblemMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ProblemMode::Fpmt => "fpmt",
            ProblemMode::Mpft => "mpft",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distribution {
    /// Tasks in a centered sub-box of the user area.
    Compact,
    /// Tasks in an enlarged box around the user area.
    Scattered,
    /// Tasks over the user area itself.
    Hybrid,
}

impl Distribution {
    pub const ALL: [Distribution; 3] = [Distribution::Compact, Distribution::Hybrid, Distribution::Scattered];

    pub fn as_str(self) -> &'static str {
        match self {
            Distribution::Compact => "compact",
            Distribution::Scattered => "scattered",
            Distribution::Hybrid => "hybrid",
        }
    }
}

/// Axis-aligned box; `x` is longitude or meters east, `y` latitude or
/// meters north.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundingBox {
    pub mode: CoordMode,
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl BoundingBox {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.min_x, self.min_y, self.max_x, self.max_y]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.min_x >= self.max_x || self.min_y >= self.max_y {
            return Err(Error::Config(format!("invalid user area box {self:?}")));
        }
        if self.mode == CoordMode::Geographic
            && (self.min_x < -180.0 || self.max_x > 180.0 || self.min_y < -90.0 || self.max_y > 90.0)
        {
            return Err(Error::Config("geographic box exceeds valid latitude/longitude".into()));
        }
        Ok(())
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.min_x + self.max_x) / 2.0, (self.min_y + self.max_y) / 2.0)
    }

    /// Same center, linear extent multiplied by `factor`; geographic boxes are
    /// clamped to valid coordinates.
    pub fn scaled(&self, factor: f64) -> BoundingBox {
        let (cx, cy) = self.center();
        let hx = (self.max_x - self.min_x) / 2.0 * factor;
        let hy = (self.max_y - self.min_y) / 2.0 * factor;
        let mut b = BoundingBox {
            mode: self.mode,
            min_x: cx - hx,
            min_y: cy - hy,
            max_x: cx + hx,
            max_y: cy + hy,
        };
        if b.mode == CoordMode::Geographic {
            b.min_x = b.min_x.max(-180.0);
            b.max_x = b.max_x.min(180.0);
            b.min_y = b.min_y.max(-90.0);
            b.max_y = b.max_y.min(90.0);
        }
        b
    }

    pub fn contains(&self, l: &Location) -> bool {
        l.mode == self.mode && (self.min_x..=self.max_x).contains(&l.x) && (self.min_y..=self.max_y).contains(&l.y)
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Location {
        let x = self.min_x + rng.gen::<f64>() * (self.max_x - self.min_x);
        let y = self.min_y + rng.gen::<f64>() * (self.max_y - self.min_y);
        Location { mode: self.mode, x, y }
    }
}

impl Default for BoundingBox {
    /// About 3.3 km square over Abidjan.
    fn default() -> Self {
        BoundingBox {
            mode: CoordMode::Geographic,
            min_x: -4.03,
            min_y: 5.32,
            max_x: -4.0,
            max_y: 5.35,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub mode: ProblemMode,
    /// Participants (fpmt) or areas (mpft, overriding `area_count`).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<u32>,
    /// Tasks; 20 when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
    /// Tasks per participant; drawn from 2..=7 when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<u32>,
    /// Task capacity (fpmt, default 6) or demand (mpft, default 5).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<u32>,
    pub distribution: Distribution,
    pub user_area: BoundingBox,
    /// Meters per minute.
    pub speed: f64,
    pub area_count: u32,
    pub area_pop_range: [u32; 2],
    pub incentive_range: [f64; 2],
    /// Linear extent of the compact sub-box relative to the user area.
    pub compact_fraction: f64,
    /// Linear extent of the scattered box relative to the user area.
    pub scattered_scale: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            seed: 0,
            mode: ProblemMode::Fpmt,
            m: None,
            n: None,
            q: None,
            p: None,
            distribution: Distribution::Hybrid,
            user_area: BoundingBox::default(),
            speed: 70.0,
            area_count: 6,
            area_pop_range: [10, 100],
            incentive_range: [1.0, 10.0],
            compact_fraction: 0.25,
            scattered_scale: 2.0,
        }
    }
}

impl ScenarioConfig {
    pub fn new(mode: ProblemMode, seed: u64) -> Self {
        ScenarioConfig {
            mode,
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.seed > i64::MAX as u64 {
            return bad(format!("seed must be at most {}", i64::MAX));
        }
        self.user_area.validate()?;
        for (name, v) in [("m", self.m), ("n", self.n), ("q", self.q), ("p", self.p)] {
            if v == Some(0) {
                return bad(format!("{name} must be positive"));
            }
        }
        if let (Some(q), Some(n)) = (self.q, self.n) {
            if q > n {
                return bad(format!("q = {q} exceeds n = {n}"));
            }
        }
        if !(self.speed.is_finite() && self.speed > 0.0) {
            return bad("speed must be positive".into());
        }
        if self.area_count == 0 {
            return bad("area_count must be positive".into());
        }
        let [lo, hi] = self.area_pop_range;
        if lo == 0 || lo > hi {
            return bad(format!("area_pop_range [{lo}, {hi}] must satisfy 1 <= lo <= hi"));
        }
        let [clo, chi] = self.incentive_range;
        if !(clo.is_finite() && chi.is_finite() && clo > 0.0 && clo <= chi) {
            return bad(format!("incentive_range [{clo}, {chi}] must satisfy 0 < lo <= hi"));
        }
        if !(self.compact_fraction > 0.0 && self.compact_fraction <= 1.0) {
            return bad("compact_fraction must lie in (0, 1]".into());
        }
        if !(self.scattered_scale.is_finite() && self.scattered_scale >= 1.0) {
            return bad("scattered_scale must be at least 1".into());
        }
        Ok(())
    }

    pub fn task_box(&self) -> BoundingBox {
        match self.distribution {
            Distribution::Compact => self.user_area.scaled(self.compact_fraction),
            Distribution::Scattered => self.user_area.scaled(self.scattered_scale),
            Distribution::Hybrid => self.user_area,
        }
    }

    /// Parses a TOML config; unset fields take their defaults.
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let c: ScenarioConfig = toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    /// Incentive for an area population: the top of `incentive_range` at the
    /// smallest population, inversely proportional above it.
    pub fn incentive_for(&self, population: u32) -> f64 {
        self.incentive_range[1] * self.area_pop_range[0] as f64 / population as f64
    }
}

/// A cell tower position from an imported CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tower {
    pub id: String,
    pub lat: f64,
    pub lon: f64,
}

/// Reads an `id,lat,lon` CSV with a header row.
pub fn parse_towers<R: Read>(reader: R) -> Result<Vec<Tower>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::Parse(e.to_string()))?;
    if headers.iter().collect::<Vec<_>>() != ["id", "lat", "lon"] {
        return Err(Error::Parse(format!(
            "tower CSV header must be `id,lat,lon`, found `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut towers = Vec::new();
    for row in rdr.deserialize::<Tower>() {
        let t = row.map_err(|e| Error::Parse(e.to_string()))?;
        Location::lat_lon(t.lat, t.lon)
            .validate()
            .map_err(|e| Error::Parse(format!("tower {}: {e}", t.id)))?;
        towers.push(t);
    }
    if towers.is_empty() {
        return Err(Error::Parse("tower CSV has no rows".into()));
    }
    Ok(towers)
}

pub fn load_towers(path: &Path) -> Result<Vec<Tower>> {
    let file = fs::File::open(path).map_err(|e| io_error(path, e))?;
    parse_towers(file)
}

fn snap(l: Location, towers: &[Tower]) -> Result<Location> {
    let mut best: Option<(f64, Location)> = None;
    for t in towers {
        let c = Location::lat_lon(t.lat, t.lon);
        let d = distance(&l, &c)?;
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, c));
        }
    }
    Ok(best.map_or(l, |(_, c)| c))
}

fn snap_all(points: &mut [Location], towers: Option<&[Tower]>) -> Result<()> {
    if let Some(towers) = towers {
        for p in points.iter_mut() {
            *p = snap(*p, towers)?;
        }
    }
    Ok(())
}

fn check_mode(config: &ScenarioConfig, want: ProblemMode) -> Result<()> {
    config.validate()?;
    if config.mode != want {
        return Err(Error::Config(format!(
            "config mode is {}, expected {}",
            config.mode.as_str(),
            want.as_str()
        )));
    }
    Ok(())
}

fn check_towers(config: &ScenarioConfig, towers: Option<&[Tower]>) -> Result<()> {
    if towers.is_some() && config.user_area.mode != CoordMode::Geographic {
        return Err(Error::Config("tower snapping needs a geographic user area".into()));
    }
    Ok(())
}

pub fn generate_fpmt(config: &ScenarioConfig) -> Result<FpmtInstance> {
    generate_fpmt_with_towers(config, None)
}

/// Participants uniform over the user area, tasks uniform over the
/// distribution's box; points optionally snapped to the nearest tower.
pub fn generate_fpmt_with_towers(config: &ScenarioConfig, towers: Option<&[Tower]>) -> Result<FpmtInstance> {
    check_mode(config, ProblemMode::Fpmt)?;
    check_towers(config, towers)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let m = config.m.unwrap_or(10);
    let n = config.n.unwrap_or(20);
    let p = config.p.unwrap_or(6);
    let q = match config.q {
        Some(q) => q,
        None if n < 2 => n,
        None => rng.gen_range(2..=7.min(n)),
    };
    if q > n {
        return Err(Error::Config(format!("q = {q} exceeds n = {n}")));
    }
    let mut people: Vec<Location> = (0..m).map(|_| config.user_area.sample(&mut rng)).collect();
    let task_box = config.task_box();
    let mut places: Vec<Location> = (0..n).map(|_| task_box.sample(&mut rng)).collect();
    snap_all(&mut people, towers)?;
    snap_all(&mut places, towers)?;
    FpmtInstance::new(
        people
            .into_iter()
            .enumerate()
            .map(|(i, location)| Participant { id: i as u32, location })
            .collect(),
        places
            .into_iter()
            .enumerate()
            .map(|(j, location)| FpmtTask {
                id: j as u32,
                location,
                capacity: p,
            })
            .collect(),
        q,
    )
}

/// `(rows, cols)` for `count` equal cells: rows is the largest divisor of
/// `count` not above its square root.
pub fn grid_shape(count: u32) -> (u32, u32) {
    let rows = (1..=count).filter(|r| r * r <= count && count.is_multiple_of(*r)).max().unwrap_or(1);
    (rows, count / rows)
}

pub fn generate_mpft(config: &ScenarioConfig) -> Result<MpftInstance> {
    generate_mpft_with_towers(config, None)
}

/// Areas are equal cells of the user area with their centroid as reference
/// point; tasks are uniform over the user area.
pub fn generate_mpft_with_towers(config: &ScenarioConfig, towers: Option<&[Tower]>) -> Result<MpftInstance> {
    check_mode(config, ProblemMode::Mpft)?;
    check_towers(config, towers)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let count = config.m.unwrap_or(config.area_count);
    let n = config.n.unwrap_or(20);
    let p = config.p.unwrap_or(5);
    let demand = n as u64 * p as u64;
    let [lo, hi] = config.area_pop_range;

    let mut pops = Vec::new();
    for attempt in 0..=POPULATION_RETRIES {
        if attempt == POPULATION_RETRIES {
            return Err(Error::Config(format!(
                "area populations never covered demand {demand} in {POPULATION_RETRIES} draws"
            )));
        }
        pops = (0..count).map(|_| rng.gen_range(lo..=hi)).collect::<Vec<u32>>();
        if pops.iter().map(|&v| v as u64).sum::<u64>() >= demand {
            break;
        }
    }

    let (rows, cols) = grid_shape(count);
    let b = config.user_area;
    let w = (b.max_x - b.min_x) / cols as f64;
    let h = (b.max_y - b.min_y) / rows as f64;
    let areas = pops
        .iter()
        .enumerate()
        .map(|(i, &pop)| {
            let (r, c) = (i as u32 / cols, i as u32 % cols);
            Area {
                id: i as u32,
                location: Location {
                    mode: b.mode,
                    x: b.min_x + (c as f64 + 0.5) * w,
                    y: b.min_y + (r as f64 + 0.5) * h,
                },
                participants: pop,
                incentive: config.incentive_for(pop),
            }
        })
        .collect();
    let mut places: Vec<Location> = (0..n).map(|_| b.sample(&mut rng)).collect();
    snap_all(&mut places, towers)?;
    let tasks = places
        .into_iter()
        .enumerate()
        .map(|(j, location)| MpftTask {
            id: j as u32,
            location,
            demand: p,
        })
        .collect();
    MpftInstance::from_locations(areas, tasks)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Instance {
    Fpmt(FpmtInstance),
    Mpft(MpftInstance),
}

impl Instance {
    pub fn mode(&self) -> ProblemMode {
        match self {
            Instance::Fpmt(_) => ProblemMode::Fpmt,
            Instance::Mpft(_) => ProblemMode::Mpft,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Instance::Fpmt(i) => i.validate(),
            Instance::Mpft(i) => i.validate(),
        }
    }
}

/// An instance plus the config that generated it, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceFile {
    pub config: Option<ScenarioConfig>,
    pub instance: Instance,
}

impl InstanceFile {
    pub fn generate(config: &ScenarioConfig, towers: Option<&[Tower]>) -> Result<Self> {
        let instance = match config.mode {
            ProblemMode::Fpmt => Instance::Fpmt(generate_fpmt_with_towers(config, towers)?),
            ProblemMode::Mpft => Instance::Mpft(generate_mpft_with_towers(config, towers)?),
        };
        Ok(InstanceFile {
            config: Some(config.clone()),
            instance,
        })
    }

    pub fn mode(&self) -> ProblemMode {
        self.instance.mode()
    }

    /// Speed from the config echo, else the default walking speed.
    pub fn speed(&self) -> f64 {
        self.config.as_ref().map_or(ScenarioConfig::default().speed, |c| c.speed)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileRepr {
    format_version: i64,
    #[serde(skip_serializing_if = "Option::is_none")]
    rng: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    config: Option<ScenarioConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fpmt: Option<FpmtInstance>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mpft: Option<MpftInstance>,
}

pub fn instance_to_string(file: &InstanceFile) -> Result<String> {
    let (fpmt, mpft) = match &file.instance {
        Instance::Fpmt(i) => (Some(i.clone()), None),
        Instance::Mpft(i) => (None, Some(i.clone())),
    };
    let repr = FileRepr {
        format_version: FORMAT_VERSION,
        rng: file.config.as_ref().map(|_| RNG_ID.to_string()),
        config: file.config.clone(),
        fpmt,
        mpft,
    };
    toml::to_string(&repr).map_err(|e| Error::Parse(e.to_string()))
}

pub fn instance_from_str(s: &str) -> Result<InstanceFile> {
    let value: toml::Table = s.parse().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
    match value.get("format_version") {
        Some(toml::Value::Integer(v)) if *v == FORMAT_VERSION => {}
        Some(toml::Value::Integer(v)) => {
            return Err(Error::Version {
                found: *v,
                expected: FORMAT_VERSION,
            })
        }
        Some(_) => return Err(Error::Parse("format_version must be an integer".into())),
        None => return Err(Error::Parse("missing field `format_version`".into())),
    }
    let repr: FileRepr = toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
    if let Some(rng) = &repr.rng {
        if rng != RNG_ID {
            return Err(Error::Parse(format!("unsupported rng `{rng}`, expected `{RNG_ID}`")));
        }
    }
    if let Some(c) = &repr.config {
        c.validate()?;
    }
    let instance = match (repr.fpmt, repr.mpft) {
        (Some(i), None) => Instance::Fpmt(i),
        (None, Some(i)) => Instance::Mpft(i),
        (None, None) => return Err(Error::Parse("missing table `fpmt` or `mpft`".into())),
        (Some(_), Some(_)) => return Err(Error::Parse("file holds both `fpmt` and `mpft`".into())),
    };
    instance.validate()?;
    if let Some(c) = &repr.config {
        if c.mode != instance.mode() {
            return Err(Error::Parse(format!(
                "config mode {} does not match the {} table",
                c.mode.as_str(),
                instance.mode().as_str()
            )));
        }
    }
    Ok(InstanceFile {
        config: repr.config,
        instance,
    })
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes the file and returns the bytes written.
pub fn save_instance(path: &Path, file: &InstanceFile) -> Result<String> {
    let text = instance_to_string(file)?;
    fs::write(path, &text).map_err(|e| io_error(path, e))?;
    Ok(text)
}

pub fn load_instance(path: &Path) -> Result<InstanceFile> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    instance_from_str(&text)
}
