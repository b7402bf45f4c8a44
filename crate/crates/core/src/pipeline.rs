//! Configuration-driven experiment pipelines with reproducible seeding,
//! stage caching, and CSV/JSON artifact output.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::adaptation::{
    eta_kernel, gaussian_adaptation, project, quadratic_adaptation, AdaptedExpansion,
    IsometryField,
};
use crate::elliptic::{assemble_source, solve_pressure, velocity, EllipticProblem, SourceSpec};
use crate::error::{Error, Result};
use crate::estimation::{
    basis_matrix, density_distance, fit_coefficients, kde, DensityEstimate, KdeSettings,
    SampleStore,
};
use crate::expansion::{ChaosExpansion, GaussianSample};
use crate::geometric::{
    closed_form_l1, compare_pdfs, exact_adapted_coeffs, sample_variants,
    truncated_adapted_coeffs, VariantDistances,
};
use crate::grid::SpatialGrid;
use crate::index::IndexSet;
use crate::random_field::{kl_decompose, sample_transmissivity, KLBasis, RandomFieldSpec};
use crate::split::{conditional_coefficients, regroup, SplitExpansion, SplitSpec};

/// Mixes a stream label and an index into a base seed (splitmix64
/// finalizer), so parallel draws are reproducible and decorrelated.
pub fn derive_seed(base: u64, stream: u64, idx: u64) -> u64 {
    let mut z = base
        .wrapping_add(stream.wrapping_mul(0x9E3779B97F4A7C15))
        .wrapping_add(idx.wrapping_mul(0xBF58476D1CE4E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Elliptic,
    Geometric,
    RandomCoeffs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EllipticConfig {
    pub grid_extent: f64,
    pub grid_cells: usize,
    pub field: RandomFieldSpec,
    pub energy_fraction: f64,
    /// Optional cap on the KL mode count (the chaos dimension d).
    pub modes: Option<usize>,
    pub order: usize,
    pub n_samples: usize,
    pub source: SourceSpec,
    pub solver_tolerance: f64,
    /// Reduced dimension for the quadratic adaptation.
    pub adapted_dim: usize,
    /// Retained order of the quadratic-adapted basis (defaults to `order`).
    pub adapted_order: Option<usize>,
    /// Draws used for probe-point density estimates.
    pub n_eval: usize,
    pub probes_per_axis: usize,
}

impl Default for EllipticConfig {
    fn default() -> Self {
        Self {
            grid_extent: 400.0,
            grid_cells: 40,
            field: RandomFieldSpec { variance: 0.5, lengths: [80.0, 80.0], mean: 0.0 },
            energy_fraction: 0.97,
            modes: None,
            order: 3,
            n_samples: 100_000,
            source: SourceSpec::corner_default(400.0),
            solver_tolerance: 1e-10,
            adapted_dim: 5,
            adapted_order: None,
            n_eval: 10_000,
            probes_per_axis: 3,
        }
    }
}

impl EllipticConfig {
    /// Reduced configuration sized for laptop-speed runs and tests.
    pub fn desk_scale() -> Self {
        Self {
            grid_cells: 20,
            modes: Some(10),
            n_samples: 10_000,
            source: SourceSpec::corner_default(400.0),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeometricConfig {
    pub xs: Vec<f64>,
    pub ds: Vec<usize>,
    pub n_samples: usize,
}

impl Default for GeometricConfig {
    fn default() -> Self {
        Self { xs: vec![0.3, 0.9, 0.99], ds: vec![10, 50, 100], n_samples: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RandomCoeffsConfig {
    /// Size of the adapted block (the leading variables).
    pub adapted_block: usize,
    /// Number of parameter-block draws for conditional statistics.
    pub n_zeta: usize,
    /// Draws of (xi, zeta) for the adapted-input marginal.
    pub n_eta: usize,
}

impl Default for RandomCoeffsConfig {
    fn default() -> Self {
        Self { adapted_block: 4, n_zeta: 200, n_eta: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub elliptic: EllipticConfig,
    pub geometric: GeometricConfig,
    pub random_coeffs: RandomCoeffsConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::Elliptic,
            seed: 2016,
            elliptic: EllipticConfig::default(),
            geometric: GeometricConfig::default(),
            random_coeffs: RandomCoeffsConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks every module precondition before any compute starts.
    pub fn validate(&self) -> Result<()> {
        let e = &self.elliptic;
        if e.grid_extent <= 0.0 || e.grid_cells == 0 {
            return Err(Error::Config("grid extent and cell count must be positive".into()));
        }
        RandomFieldSpec::new(e.field.variance, e.field.lengths, e.field.mean)
            .map_err(|err| Error::Config(err.to_string()))?;
        if !(e.energy_fraction > 0.0 && e.energy_fraction <= 1.0) {
            return Err(Error::Config("energy fraction must be in (0, 1]".into()));
        }
        if e.order < 2 {
            return Err(Error::Config(
                "chaos order must be >= 2 for the quadratic adaptation".into(),
            ));
        }
        if e.n_samples == 0 || e.n_eval == 0 {
            return Err(Error::Config("sample counts must be positive".into()));
        }
        if e.adapted_dim == 0 {
            return Err(Error::Config("adapted dimension must be >= 1".into()));
        }
        if let Some(m) = e.modes {
            if e.adapted_dim > m {
                return Err(Error::Config(format!(
                    "adapted dimension {} exceeds mode cap {m}",
                    e.adapted_dim
                )));
            }
        }
        if !(e.solver_tolerance > 0.0) {
            return Err(Error::Config("solver tolerance must be positive".into()));
        }
        if e.probes_per_axis == 0 || e.probes_per_axis + 1 > e.grid_cells {
            return Err(Error::Config("probe lattice does not fit the grid".into()));
        }
        for &x in &self.geometric.xs {
            if !(0.0..1.0).contains(&x) {
                return Err(Error::Config(format!("geometric abscissa {x} outside [0, 1)")));
            }
        }
        for &d in &self.geometric.ds {
            if d == 0 {
                return Err(Error::Config("geometric truncation length must be >= 1".into()));
            }
        }
        if self.random_coeffs.adapted_block == 0 {
            return Err(Error::Config("adapted block must be non-empty".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON serialization.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Per-directory manifest recording provenance of every artifact file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub files: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(config: &PipelineConfig) -> Self {
        Self {
            config_hash: config.hash(),
            seed: config.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            files: BTreeMap::new(),
        }
    }

    pub fn record(&mut self, name: &str, description: &str) {
        self.files.insert(name.to_string(), description.to_string());
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(dir.join("manifest.json"), text)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(dir.join("manifest.json"))?;
        serde_json::from_str(&text).map_err(|e| Error::Format {
            path: dir.join("manifest.json").display().to_string(),
            reason: e.to_string(),
        })
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

/// Writes named per-cell columns prefixed with the cell-center coordinates.
pub fn write_grid_csv<W: Write>(
    grid: &SpatialGrid,
    columns: &[(&str, &DVector<f64>)],
    mut w: W,
) -> Result<()> {
    let names: Vec<&str> = columns.iter().map(|(n, _)| *n).collect();
    writeln!(w, "x,y,{}", names.join(","))?;
    for pt in 0..grid.n_points() {
        let (x, y) = grid.center(pt);
        let row: Vec<String> =
            columns.iter().map(|(_, v)| format!("{:.17e}", v[pt])).collect();
        writeln!(w, "{x},{y},{}", row.join(","))?;
    }
    Ok(())
}

/// Draws the MC input ensemble and solves the pressure problem per sample.
pub fn run_ensemble(
    kl: &KLBasis,
    source: &DVector<f64>,
    tolerance: f64,
    n_samples: usize,
    seed: u64,
) -> Result<SampleStore> {
    let d = kl.n_modes();
    let grid = kl.grid().clone();
    let rows: Vec<(Vec<f64>, DVector<f64>)> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let xi = GaussianSample::draw(d, derive_seed(seed, 1, i as u64));
            let kappa = sample_transmissivity(kl, &xi)?;
            let problem =
                EllipticProblem::new(grid.clone(), kappa, source.clone(), tolerance)?;
            let u = solve_pressure(&problem)?;
            Ok((xi.values().to_vec(), u))
        })
        .collect::<Result<_>>()?;
    let inputs = DMatrix::from_fn(n_samples, d, |i, j| rows[i].0[j]);
    let outputs = DMatrix::from_fn(n_samples, grid.n_points(), |i, j| rows[i].1[j]);
    SampleStore::new(inputs, outputs, seed)
}

/// Evaluates the fitted expansion at fresh Gaussian draws; one sample
/// vector per probe point.
pub fn expansion_probe_samples(
    e: &ChaosExpansion,
    probes: &[usize],
    n: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let d = e.index_set().dim();
    let inputs = DMatrix::from_fn(n, d, |i, j| {
        let s = GaussianSample::draw(1, derive_seed(seed, 2 + j as u64, i as u64));
        s.values()[0]
    });
    let psi = basis_matrix(e.index_set(), &inputs, 0..n);
    let mut out = vec![vec![0.0; n]; probes.len()];
    for (k, &pt) in probes.iter().enumerate() {
        if pt >= e.n_points() {
            return Err(Error::PointOutOfRange { index: pt, n_points: e.n_points() });
        }
        let coeffs = e.coeffs().row(pt).transpose();
        let vals = &psi * coeffs;
        out[k] = vals.iter().copied().collect();
    }
    Ok(out)
}

/// Evaluates a projected expansion at eta ~ N(0, I); one sample vector per
/// probe point.
pub fn adapted_probe_samples(
    a: &AdaptedExpansion,
    probes: &[usize],
    n: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let d = a.index_set().dim();
    let draws: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let eta = GaussianSample::draw(d, derive_seed(seed, 11, i as u64));
            probes
                .iter()
                .map(|&pt| a.eval(eta.values(), pt))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let mut out = vec![vec![0.0; n]; probes.len()];
    for (i, row) in draws.iter().enumerate() {
        for (k, &v) in row.iter().enumerate() {
            out[k][i] = v;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeDistances {
    pub point: usize,
    pub x: f64,
    pub y: f64,
    pub gaussian_l1: f64,
    pub gaussian_hellinger: f64,
    pub quadratic_l1: f64,
    pub quadratic_hellinger: f64,
}

#[derive(Debug)]
pub struct EllipticArtifacts {
    pub grid: SpatialGrid,
    pub kl: KLBasis,
    pub expansion: ChaosExpansion,
    pub gaussian_field: IsometryField,
    pub quadratic_field: IsometryField,
    pub gaussian: AdaptedExpansion,
    pub quadratic: AdaptedExpansion,
    pub probes: Vec<usize>,
    pub distances: Vec<ProbeDistances>,
}

/// Fits (or reloads from cache) the chaos expansion of the pressure field.
pub fn elliptic_expansion(config: &PipelineConfig, out: Option<&Path>) -> Result<(KLBasis, ChaosExpansion)> {
    config.validate()?;
    let e = &config.elliptic;
    let grid = SpatialGrid::square(e.grid_extent, e.grid_cells)?;
    let mut kl = kl_decompose(&e.field, &grid, e.energy_fraction).map_err(|err| err.at_stage("kl"))?;
    if let Some(m) = e.modes {
        kl = kl.truncated(m);
    }
    let set = IndexSet::new(kl.n_modes(), e.order)?;

    let cache_path = out.map(|dir| dir.join("expansion.csv"));
    if let (Some(path), Some(dir)) = (&cache_path, out) {
        if path.exists() {
            if let Ok(manifest) = Manifest::load(dir) {
                if manifest.config_hash == config.hash() && manifest.seed == config.seed {
                    let cached = ChaosExpansion::load(path)?;
                    if cached.index_set() == &set {
                        log::info!("reusing cached expansion at {}", path.display());
                        return Ok((kl, cached));
                    }
                }
            }
        }
    }

    let source = assemble_source(&e.source, &grid);
    let store = run_ensemble(&kl, &source, e.solver_tolerance, e.n_samples, config.seed)
        .map_err(|err| err.at_stage("ensemble"))?;
    let expansion = fit_coefficients(&store, &set, Some(grid.clone()))
        .map_err(|err| err.at_stage("fit"))?;
    if let (Some(path), Some(dir)) = (&cache_path, out) {
        ensure_dir(dir)?;
        expansion.save(path)?;
        let mut manifest = Manifest::load(dir).unwrap_or_else(|_| Manifest::new(config));
        manifest.config_hash = config.hash();
        manifest.seed = config.seed;
        manifest.record("expansion.csv", "fitted chaos expansion of the pressure field");
        manifest.save(dir)?;
    }
    Ok((kl, expansion))
}

fn probe_density(samples: &[f64]) -> Result<DensityEstimate> {
    kde(samples, &KdeSettings::default())
}

/// Full elliptic experiment: KL, MC ensemble, fit, both adaptations,
/// projection, kernel eigenpairs, probe-point pdf comparisons.
pub fn run_elliptic(config: &PipelineConfig, out: Option<&Path>) -> Result<EllipticArtifacts> {
    let e = &config.elliptic;
    let (kl, expansion) = elliptic_expansion(config, out)?;
    let grid = expansion.grid().cloned().expect("elliptic expansion carries a grid");
    let set = expansion.index_set().clone();
    let q = e.adapted_order.unwrap_or(e.order).min(e.order);

    let gaussian_field =
        gaussian_adaptation(&expansion).map_err(|err| err.at_stage("adapt"))?;
    let quadratic_field = quadratic_adaptation(&expansion, e.adapted_dim)
        .map_err(|err| err.at_stage("adapt"))?;

    // the 1-D Gaussian-adapted series keeps 3 terms: constant, linear and
    // quadratic in eta_1; the quadratic adaptation keeps the whole order-q
    // chaos in the leading adapted variables
    let gaussian_retained = set.subset_full(1, 2.min(e.order));
    let quadratic_retained = set.subset_full(e.adapted_dim.min(set.dim()), q);
    let gaussian = project(&expansion, &gaussian_field, &gaussian_retained)
        .map_err(|err| err.at_stage("project"))?;
    let quadratic = project(&expansion, &quadratic_field, &quadratic_retained)
        .map_err(|err| err.at_stage("project"))?;

    let probes = grid.probe_lattice(e.probes_per_axis);
    let full_samples = expansion_probe_samples(&expansion, &probes, e.n_eval, derive_seed(config.seed, 3, 0))
        .map_err(|err| err.at_stage("pdf"))?;
    let gauss_samples = adapted_probe_samples(&gaussian, &probes, e.n_eval, derive_seed(config.seed, 4, 0))
        .map_err(|err| err.at_stage("pdf"))?;
    let quad_samples = adapted_probe_samples(&quadratic, &probes, e.n_eval, derive_seed(config.seed, 5, 0))
        .map_err(|err| err.at_stage("pdf"))?;

    let mut distances = Vec::with_capacity(probes.len());
    for (k, &pt) in probes.iter().enumerate() {
        let full = probe_density(&full_samples[k]).map_err(|err| err.at_stage("pdf"))?;
        let gauss = probe_density(&gauss_samples[k]).map_err(|err| err.at_stage("pdf"))?;
        let quad = probe_density(&quad_samples[k]).map_err(|err| err.at_stage("pdf"))?;
        let (gaussian_l1, gaussian_hellinger) = density_distance(&gauss, &full)?;
        let (quadratic_l1, quadratic_hellinger) = density_distance(&quad, &full)?;
        let (x, y) = grid.center(pt);
        distances.push(ProbeDistances {
            point: pt,
            x,
            y,
            gaussian_l1,
            gaussian_hellinger,
            quadratic_l1,
            quadratic_hellinger,
        });
    }

    if let Some(dir) = out {
        ensure_dir(dir)?;
        let mut manifest = Manifest::load(dir).unwrap_or_else(|_| Manifest::new(config));
        manifest.config_hash = config.hash();
        manifest.seed = config.seed;

        kl.save_csv(&dir.join("kl_eigenvalues.csv"), &dir.join("kl_eigenfunctions.csv"))?;
        manifest.record("kl_eigenvalues.csv", "KL spectrum with cumulative energy");
        manifest.record("kl_eigenfunctions.csv", "KL eigenfunctions on the grid");

        expansion.save(&dir.join("expansion.csv"))?;
        manifest.record("expansion.csv", "fitted chaos expansion of the pressure field");

        gaussian_field.save(&dir.join("isometry_gaussian.csv"))?;
        quadratic_field.save(&dir.join("isometry_quadratic.csv"))?;
        manifest.record("isometry_gaussian.csv", "Gaussian-adaptation isometry field");
        manifest.record("isometry_quadratic.csv", "quadratic-adaptation isometry field");

        let kernel = eta_kernel(&gaussian_field, 0)?;
        let eig = kernel.eigendecompose();
        let mut f = std::fs::File::create(dir.join("kernel_eigenvalues.csv"))?;
        writeln!(f, "mode,eigenvalue")?;
        for (i, &l) in eig.eigenvalues.iter().take(kl.n_modes()).enumerate() {
            writeln!(f, "{},{:.17e}", i + 1, l)?;
        }
        let funcs: Vec<DVector<f64>> =
            (0..eig.eigenfunctions.ncols()).map(|c| eig.eigenfunctions.column(c).into_owned()).collect();
        let named: Vec<(String, &DVector<f64>)> =
            funcs.iter().enumerate().map(|(i, v)| (format!("phi{}", i + 1), v)).collect();
        let cols: Vec<(&str, &DVector<f64>)> =
            named.iter().map(|(n, v)| (n.as_str(), *v)).collect();
        write_grid_csv(&grid, &cols, std::fs::File::create(dir.join("kernel_eigenfunctions.csv"))?)?;
        manifest.record("kernel_eigenvalues.csv", "spectrum of the adapted-input kernel");
        manifest.record("kernel_eigenfunctions.csv", "eigenfunctions of the adapted-input kernel");

        // mean/variance maps and one velocity sample
        let (mean, var): (Vec<f64>, Vec<f64>) =
            (0..expansion.n_points()).map(|pt| expansion.moments(pt)).unzip();
        let mean = DVector::from_vec(mean);
        let var = DVector::from_vec(var);
        write_grid_csv(
            &grid,
            &[("mean", &mean), ("variance", &var)],
            std::fs::File::create(dir.join("pressure_moments.csv"))?,
        )?;
        manifest.record("pressure_moments.csv", "pressure mean and variance maps");

        let xi = GaussianSample::draw(kl.n_modes(), derive_seed(config.seed, 1, 0));
        let kappa = sample_transmissivity(&kl, &xi)?;
        let source = assemble_source(&e.source, &grid);
        let problem = EllipticProblem::new(grid.clone(), kappa, source, e.solver_tolerance)?;
        let u = solve_pressure(&problem)?;
        let v = velocity(&problem, &u)?;
        write_grid_csv(
            &grid,
            &[("pressure", &u), ("vx", &v.vx), ("vy", &v.vy)],
            std::fs::File::create(dir.join("velocity_sample.csv"))?,
        )?;
        manifest.record("velocity_sample.csv", "pressure and Darcy velocity for the first draw");

        let mut f = std::fs::File::create(dir.join("pdf_distances.csv"))?;
        writeln!(f, "point,x,y,gaussian_l1,gaussian_hellinger,quadratic_l1,quadratic_hellinger")?;
        for d in &distances {
            writeln!(
                f,
                "{},{},{},{:.6e},{:.6e},{:.6e},{:.6e}",
                d.point, d.x, d.y, d.gaussian_l1, d.gaussian_hellinger, d.quadratic_l1,
                d.quadratic_hellinger
            )?;
        }
        manifest.record("pdf_distances.csv", "probe-point distances of adapted pdfs to the full pdf");
        manifest.save(dir)?;
    }

    Ok(EllipticArtifacts {
        grid,
        kl,
        expansion,
        gaussian_field,
        quadratic_field,
        gaussian,
        quadratic,
        probes,
        distances,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeometricCase {
    pub x: f64,
    pub d: usize,
    pub u1: f64,
    pub u2: f64,
    pub u1_truncated: f64,
    pub u2_truncated: f64,
    pub distances: VariantDistances,
    /// L1 distances to the exact law from closed-form densities (no
    /// sampling noise): before-adaptation and after-adaptation truncation.
    pub before_l1_exact: f64,
    pub after_l1_exact: f64,
}

pub fn run_geometric(config: &PipelineConfig, out: Option<&Path>) -> Result<Vec<GeometricCase>> {
    config.validate()?;
    let g = &config.geometric;
    let mut cases = Vec::new();
    for &x in &g.xs {
        for &d in &g.ds {
            let (u1, u2) = exact_adapted_coeffs(x).map_err(|e| e.at_stage("geometric"))?;
            let (h1, h2) =
                truncated_adapted_coeffs(x, d).map_err(|e| e.at_stage("geometric"))?;
            let seed = derive_seed(config.seed, 7, (d as u64) << 20 | (x * 1e6) as u64);
            let distances =
                compare_pdfs(x, d, g.n_samples, seed).map_err(|e| e.at_stage("geometric"))?;
            let (before_l1_exact, after_l1_exact) =
                closed_form_l1(x, d).map_err(|e| e.at_stage("geometric"))?;
            cases.push(GeometricCase {
                x,
                d,
                u1,
                u2,
                u1_truncated: h1,
                u2_truncated: h2,
                distances,
                before_l1_exact,
                after_l1_exact,
            });
        }
    }

    if let Some(dir) = out {
        ensure_dir(dir)?;
        let mut manifest = Manifest::load(dir).unwrap_or_else(|_| Manifest::new(config));
        manifest.config_hash = config.hash();
        manifest.seed = config.seed;
        let mut f = std::fs::File::create(dir.join("geometric_cases.csv"))?;
        writeln!(
            f,
            "x,d,u1,u2,u1_truncated,u2_truncated,before_l1,before_hellinger,after_l1,after_hellinger,before_l1_exact,after_l1_exact"
        )?;
        for c in &cases {
            writeln!(
                f,
                "{},{},{:.12e},{:.12e},{:.12e},{:.12e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e}",
                c.x,
                c.d,
                c.u1,
                c.u2,
                c.u1_truncated,
                c.u2_truncated,
                c.distances.before_l1,
                c.distances.before_hellinger,
                c.distances.after_l1,
                c.distances.after_hellinger,
                c.before_l1_exact,
                c.after_l1_exact
            )?;
        }
        manifest.record("geometric_cases.csv", "coefficients and pdf distances per (x, d)");

        // pdf curves for each case (plot-ready)
        for c in &cases {
            let seed = derive_seed(config.seed, 7, (c.d as u64) << 20 | (c.x * 1e6) as u64);
            let samples = sample_variants(c.x, c.d, g.n_samples.min(20_000), seed)?;
            let settings = KdeSettings::default();
            for (tag, data) in [
                ("exact", &samples.exact),
                ("before", &samples.before),
                ("after", &samples.after),
            ] {
                let est = kde(data, &settings)?;
                let name = format!("geometric_x{}_d{}_{}.csv", c.x, c.d, tag);
                est.write_csv(std::fs::File::create(dir.join(&name))?)?;
                manifest.record(&name, "pdf curve of a geometric-benchmark variant");
            }
        }
        manifest.save(dir)?;
    }
    Ok(cases)
}

#[derive(Debug)]
pub struct RandomCoeffsArtifacts {
    pub split: SplitExpansion,
    /// Mean over parameter-block draws of the adapted constant coefficient.
    pub expected_u0: DVector<f64>,
    /// The base expansion's constant coefficient map.
    pub u0: DVector<f64>,
    /// Draws of the first adapted variable at the probe point.
    pub eta_samples: Vec<f64>,
    pub probe_point: usize,
}

/// Draws `eta_1 = a_1(zeta) . xi` at one grid point, with `a_1(zeta)` the
/// normalized conditional first-order coefficient vector.
pub fn sample_conditional_eta(
    se: &SplitExpansion,
    point: usize,
    n: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let d1 = se.d1();
    let xi_set = se.xi_set().clone();
    let first_order: Vec<usize> = (0..d1)
        .map(|i| {
            xi_set
                .position(&crate::index::MultiIndex::axis(d1, i, 1))
                .expect("order >= 1")
        })
        .collect();
    (0..n)
        .into_par_iter()
        .map(|k| {
            let zeta = GaussianSample::draw(se.d2(), derive_seed(seed, 8, k as u64));
            let coeffs = conditional_coefficients(se, zeta.values(), point)?;
            let mut a1 = DVector::zeros(d1);
            for (i, &pos) in first_order.iter().enumerate() {
                a1[i] = coeffs[pos];
            }
            let norm = a1.norm();
            if norm < crate::adaptation::DEGENERATE_NORM {
                return Err(Error::DegenerateGaussianPart {
                    point,
                    location: se.base().grid().map(|g| g.center(point)),
                    norm,
                });
            }
            let xi = GaussianSample::draw(d1, derive_seed(seed, 9, k as u64));
            let mut eta = 0.0;
            for i in 0..d1 {
                eta += a1[i] / norm * xi.values()[i];
            }
            Ok(eta)
        })
        .collect()
}

pub fn run_random_coeffs(
    config: &PipelineConfig,
    out: Option<&Path>,
) -> Result<RandomCoeffsArtifacts> {
    let (_, expansion) = elliptic_expansion(config, out)?;
    let rc = &config.random_coeffs;
    let d = expansion.index_set().dim();
    let d1 = rc.adapted_block.min(d);
    let split = SplitSpec::leading(d, d1)?;
    let se = regroup(&expansion, &split).map_err(|e| e.at_stage("regroup"))?;

    let n_points = expansion.n_points();
    let means: Vec<f64> = (0..n_points)
        .into_par_iter()
        .map(|pt| {
            let mut acc = 0.0;
            for k in 0..rc.n_zeta {
                let zeta = GaussianSample::draw(se.d2(), derive_seed(config.seed, 10, k as u64));
                // rotation preserves the constant coefficient, so the
                // adapted U_0 is the conditional U_0 itself
                acc += conditional_coefficients(&se, zeta.values(), pt)?[0];
            }
            Ok(acc / rc.n_zeta as f64)
        })
        .collect::<Result<_>>()?;
    let expected_u0 = DVector::from_vec(means);
    let u0 = expansion.coeffs().column(0).into_owned();

    let grid = expansion.grid().cloned().expect("elliptic expansion carries a grid");
    let probe_point = grid.probe_lattice(1)[0];
    let eta_samples = sample_conditional_eta(&se, probe_point, rc.n_eta, config.seed)
        .map_err(|e| e.at_stage("conditional-adapt"))?;

    if let Some(dir) = out {
        ensure_dir(dir)?;
        let mut manifest = Manifest::load(dir).unwrap_or_else(|_| Manifest::new(config));
        manifest.config_hash = config.hash();
        manifest.seed = config.seed;
        write_grid_csv(
            &grid,
            &[("u0", &u0), ("expected_adapted_u0", &expected_u0)],
            std::fs::File::create(dir.join("expected_adapted_u0.csv"))?,
        )?;
        manifest.record(
            "expected_adapted_u0.csv",
            "constant coefficient map vs. its conditional-adaptation mean",
        );
        let eta_kde = kde(&eta_samples, &KdeSettings::default())?;
        eta_kde.write_csv(std::fs::File::create(dir.join("eta_marginal.csv"))?)?;
        manifest.record("eta_marginal.csv", "marginal pdf of the conditionally adapted input");
        manifest.save(dir)?;
    }

    Ok(RandomCoeffsArtifacts { split: se, expected_u0, u0, eta_samples, probe_point })
}

/// Dispatches on the configured experiment tag.
pub fn run(config: &PipelineConfig, out: Option<&Path>) -> Result<Vec<PathBuf>> {
    match config.experiment {
        Experiment::Elliptic => {
            run_elliptic(config, out)?;
        }
        Experiment::Geometric => {
            run_geometric(config, out)?;
        }
        Experiment::RandomCoeffs => {
            run_random_coeffs(config, out)?;
        }
    }
    let mut written = Vec::new();
    if let Some(dir) = out {
        if let Ok(manifest) = Manifest::load(dir) {
            written = manifest.files.keys().map(|f| dir.join(f)).collect();
        }
    }
    Ok(written)
}
