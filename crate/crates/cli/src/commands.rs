use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use archk::gp::{self, Dataset, ModelSummary, TuneOptions};
use archk::io::{self, RunManifest};
use archk::kernel::{HierarchicalKernel, KernelSpec};
use archk::metric;
use archk::space::{ParamSpace, RawConfig, ValidConfig};
use archk::verify::{self, CheckReport};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::CliError;

const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type CmdResult = Result<(), CliError>;

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn load_space(path: &Path) -> Result<ParamSpace, CliError> {
    Ok(ParamSpace::from_json(&read_text(path)?)?)
}

fn load_kernel(space: &ParamSpace, path: &Path) -> Result<HierarchicalKernel, CliError> {
    let spec = KernelSpec::from_json(&read_text(path)?)?;
    Ok(HierarchicalKernel::new(space, &spec)?)
}

fn load_dataset(space: &ParamSpace, path: &Path) -> Result<io::DatasetFile, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(io::read_dataset(space, file)?)
}

/// Writes to `out`, or to stdout when no path is given.
fn emit(out: Option<&Path>, bytes: &[u8]) -> CmdResult {
    match out {
        Some(path) => fs::write(path, bytes).map_err(|e| CliError::io(path, e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(bytes)
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::Io(format!("stdout: {e}")))
        }
    }
}

/// CSV artifacts carry their manifest in a `<out>.manifest.json` sidecar.
fn emit_sidecar(out: Option<&Path>, manifest: &RunManifest) -> CmdResult {
    if let Some(path) = out {
        let mut sidecar = path.as_os_str().to_owned();
        sidecar.push(".manifest.json");
        let sidecar = PathBuf::from(sidecar);
        let text = serde_json::to_string_pretty(manifest)? + "\n";
        fs::write(&sidecar, text).map_err(|e| CliError::io(&sidecar, e))?;
    }
    Ok(())
}

fn json_line<T: Serialize>(value: &T) -> Result<String, CliError> {
    Ok(serde_json::to_string(value)? + "\n")
}

fn manifest(subcommand: &str, inputs: &[&Path]) -> RunManifest {
    inputs
        .iter()
        .fold(RunManifest::new(subcommand, VERSION), |m, p| m.input(p.display().to_string()))
}

pub fn validate(space: &Path) -> CmdResult {
    let space = load_space(space)?;
    let roots: Vec<&str> = space.roots().map(|i| space.dimension(i).id.as_str()).collect();
    let text = format!("D={}\nroots={}\ndepth={}\n", space.len(), roots.join(","), space.depth());
    emit(None, text.as_bytes())
}

pub fn sample(space_path: &Path, n: usize, seed: u64, out: Option<&Path>) -> CmdResult {
    let space = load_space(space_path)?;
    let mut rng = archk::seeded_rng(seed, 0);
    let sampler = space.sampler();
    let configs: Vec<ValidConfig> = (0..n).map(|_| sampler.sample(&mut rng)).collect();
    let mut buf = Vec::new();
    io::write_dataset(&space, &configs, None, &mut buf)?;
    emit(out, &buf)?;
    emit_sidecar(out, &manifest("sample", &[space_path]).seed(seed))
}

pub fn embed(space_path: &Path, spec_path: &Path, data_path: &Path, out: Option<&Path>) -> CmdResult {
    let space = load_space(space_path)?;
    let kernel = load_kernel(&space, spec_path)?;
    let data = load_dataset(&space, data_path)?;
    let mut text = String::new();
    for (row, config) in data.configs.iter().enumerate() {
        let dims = (0..space.len())
            .map(|i| {
                let e = kernel.embed(i, config)?;
                Ok(json!({ "dimension": space.dimension(i).id, "coords": e.coords() }))
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        text += &json_line(&json!({ "row": row + 1, "embedding": dims }))?;
    }
    emit(out, text.as_bytes())
}

pub fn gram(space_path: &Path, spec_path: &Path, data_path: &Path, out: Option<&Path>) -> CmdResult {
    let space = load_space(space_path)?;
    let kernel = load_kernel(&space, spec_path)?;
    let data = load_dataset(&space, data_path)?;
    let gram = kernel.gram(&data.configs)?;
    log::info!("gram {}x{} configs={}", gram.len(), gram.len(), gram.config_digest);
    emit(out, io::format_matrix(&gram.entries).as_bytes())?;
    emit_sidecar(
        out,
        &manifest("gram", &[space_path, spec_path, data_path]).spec_digest(gram.spec_digest),
    )
}

fn report_lines(reports: &[CheckReport], manifest: &RunManifest) -> Result<String, CliError> {
    let mut text = String::new();
    for r in reports {
        text += &json_line(&json!({ "manifest": manifest, "report": r }))?;
    }
    Ok(text)
}

fn all_pass(reports: &[CheckReport]) -> CmdResult {
    match reports.iter().find(|r| !r.pass) {
        None => Ok(()),
        Some(r) => Err(CliError::domain(format!(
            "CheckFailed: {}{} worst violation {:e} exceeds {:e}",
            r.check,
            r.dimension.as_deref().map(|d| format!(" [{d}]")).unwrap_or_default(),
            r.worst_violation,
            r.tolerance
        ))),
    }
}

pub fn psd(gram_path: &Path, out: Option<&Path>) -> CmdResult {
    let matrix = io::parse_matrix(&read_text(gram_path)?)?;
    let report = verify::check_psd(&matrix, verify::PSD_TOLERANCE)?;
    let reports = [report];
    emit(out, report_lines(&reports, &manifest("psd", &[gram_path]))?.as_bytes())?;
    all_pass(&reports)
}

pub fn check(space_path: &Path, spec_path: &Path, pairs: usize, seed: u64, out: Option<&Path>) -> CmdResult {
    let space = load_space(space_path)?;
    let kernel = load_kernel(&space, spec_path)?;
    let mut reports = verify::check_isometry(&kernel, pairs, seed)?;
    reports.extend(verify::check_axioms(&kernel, pairs, seed)?);
    reports.extend(verify::check_triangle(&kernel, pairs, seed)?);
    let m = manifest("check", &[space_path, spec_path]).seed(seed).spec_digest(kernel.digest());
    emit(out, report_lines(&reports, &m)?.as_bytes())?;
    all_pass(&reports)
}

/// Model file written by `fit` and `tune`, read back by `predict`.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub manifest: RunManifest,
    pub model: ModelSummary,
    pub train: TrainingSet,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tuning: Option<TuningSummary>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSet {
    pub configs: Vec<RawConfig>,
    pub targets: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuningSummary {
    pub budget: usize,
    pub incumbent: usize,
    pub failed: usize,
}

fn training_data(space: &ParamSpace, path: &Path) -> Result<Dataset, CliError> {
    let file = load_dataset(space, path)?;
    let targets = file
        .targets
        .ok_or_else(|| CliError::domain(format!("{}: training data needs a `y` column", path.display())))?;
    Ok(Dataset::new(file.configs, targets)?)
}

fn write_model(
    space: &ParamSpace,
    model: &gp::GpModel,
    data: &Dataset,
    manifest: RunManifest,
    tuning: Option<TuningSummary>,
    out: Option<&Path>,
) -> CmdResult {
    let file = ModelFile {
        manifest,
        model: model.summary(),
        train: TrainingSet {
            configs: data.configs().iter().map(|c| space.to_raw(c)).collect(),
            targets: data.targets().to_vec(),
        },
        tuning,
    };
    emit(out, (serde_json::to_string_pretty(&file)? + "\n").as_bytes())
}

pub fn fit(space_path: &Path, spec_path: &Path, data_path: &Path, noise: f64, out: Option<&Path>) -> CmdResult {
    let space = load_space(space_path)?;
    let kernel = load_kernel(&space, spec_path)?;
    let data = training_data(&space, data_path)?;
    let model = gp::fit(&kernel, &data, noise)?;
    if model.jitter() > 0.0 {
        log::warn!("fit needed jitter {:e}", model.jitter());
    }
    let m = manifest("fit", &[space_path, spec_path, data_path]).spec_digest(kernel.digest());
    write_model(&space, &model, &data, m, None, out)
}

pub fn tune(space_path: &Path, data_path: &Path, budget: usize, seed: u64, out: Option<&Path>) -> CmdResult {
    let space = load_space(space_path)?;
    let data = training_data(&space, data_path)?;
    let result = gp::tune(&space, &data, &TuneOptions::new(budget, seed))?;
    let failed = result.candidates.iter().filter(|c| c.lml.is_none()).count();
    log::info!("tune: incumbent {} lml {} ({} failed)", result.incumbent, result.lml, failed);
    let kernel = HierarchicalKernel::new(&space, &result.spec)?;
    let model = gp::fit(&kernel, &data, result.noise)?;
    let m = manifest("tune", &[space_path, data_path]).seed(seed).spec_digest(kernel.digest());
    let tuning = TuningSummary {
        budget,
        incumbent: result.incumbent,
        failed,
    };
    write_model(&space, &model, &data, m, Some(tuning), out)
}

pub fn predict(space_path: &Path, model_path: &Path, data_path: &Path, out: Option<&Path>) -> CmdResult {
    let space = load_space(space_path)?;
    let file: ModelFile = serde_json::from_str(&read_text(model_path)?)?;
    let kernel = HierarchicalKernel::new(&space, &file.model.spec)?;
    let configs = file
        .train
        .configs
        .iter()
        .map(|raw| space.validate_config(raw))
        .collect::<Result<Vec<_>, _>>()?;
    let model = gp::fit(&kernel, &Dataset::new(configs, file.train.targets)?, file.model.noise)?;
    let queries = load_dataset(&space, data_path)?.configs;
    let pred = model.predict(&queries)?;
    if pred.clamped > 0 {
        log::info!("clamped {} variances (min raw {:e})", pred.clamped, pred.min_raw_variance);
    }
    let mut text = String::new();
    for (row, (mean, variance)) in pred.means.iter().zip(&pred.variances).enumerate() {
        text += &json_line(&json!({ "row": row + 1, "mean": mean, "variance": variance }))?;
    }
    emit(out, text.as_bytes())
}

pub fn rho_star(m: usize) -> CmdResult {
    let paper = metric::rho_star_paper(m).map_err(CliError::domain)?;
    let crossover = metric::rho_star_crossover(m).map_err(CliError::domain)?;
    let text = format!(
        "m={m}\nrho_star_paper={paper}\nrho_star_crossover={crossover}\n\
         note: rho_star_paper solves sqrt2*rho = 1+(m-1)(1-rho)^2; the categorical metric reaches omega \
         for differing categories where sqrt2*rho = sqrt(1+(m-1)(1-rho)^2), at rho_star_crossover\n"
    );
    emit(None, text.as_bytes())
}

