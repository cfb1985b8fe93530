use std::path::PathBuf;

use serde::Serialize;

use freqtoken::cost::{grid_search, mac_count, CkaProxyEvaluator, SearchOptions};
use freqtoken::freq::{awgn_sensitivity, collapse_report, grid_features, cka_or_degenerate, hf_lf_stats, token_spectrum};
use freqtoken::io::{encode, gen_synthetic, read_ftkr, ExperimentConfig, Tensor};
use freqtoken::numeric::{Grid2D, SeededRng};
use freqtoken::reduction::{ReducerKind, ReductionSchedule};
use freqtoken::verify::run_suite;
use freqtoken::vit::{init_weights, ForwardInput, ModelConfig, Vit, Weights};
use freqtoken::Error;

use crate::args::{Common, Inputs};
use crate::error::{CliError, CliResult};
use crate::output::Artifacts;

/// Stream id of the weight initializer; image `i` uses stream `i`.
const WEIGHT_STREAM: u64 = 1 << 48;
const DEFAULT_VERIFY_TRIALS: usize = 1000;

pub struct Context {
    pub config: ExperimentConfig,
    pub out: PathBuf,
    pub trials: Option<usize>,
    pub quiet: bool,
}

impl Context {
    pub fn resolve(common: &Common) -> CliResult<Self> {
        let mut config = match &common.config {
            Some(path) => {
                if !path.exists() {
                    return Err(Error::Io(std::io::Error::new(
                        std::io::ErrorKind::NotFound,
                        format!("config file {} not found", path.display()),
                    ))
                    .into());
                }
                ExperimentConfig::load(path)?
            }
            None => ExperimentConfig::new(default_model()),
        };
        if let Some(seed) = common.seed {
            config.seed = seed;
        }
        let out = common
            .out
            .clone()
            .or_else(|| config.output_dir.as_ref().map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"));
        Ok(Self { config, out, trials: common.trials.map(|t| t as usize), quiet: common.quiet })
    }

    fn say(&self, msg: impl std::fmt::Display) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }

    fn image_count(&self) -> usize {
        self.trials.unwrap_or(self.config.batch_size)
    }

    fn images(&self, inputs: &Inputs) -> CliResult<Vec<Grid2D>> {
        let m = &self.config.model;
        match &inputs.images {
            Some(path) => load_images(path, m.image_side(), m.in_channels, self.trials),
            None => Ok(gen_synthetic(&self.config.synthetic, m.image_side(), m.in_channels, self.image_count(), self.config.seed)?),
        }
    }

    fn model(&self, inputs: &Inputs) -> CliResult<Vit> {
        let c = &self.config.model;
        let weights = match &inputs.weights {
            Some(path) => Weights::from_tensors(&read_ftkr(path)?, c)?,
            None => seeded_weights(c, self.config.seed),
        };
        Ok(Vit::new(c.clone(), weights)?)
    }
}

/// 12 blocks, width 64, 4 heads on a 14 x 14 grid of 4 x 4 RGB patches.
pub fn default_model() -> ModelConfig {
    ModelConfig::new(12, 64, 4).with_grid(14, 4, 3)
}

fn seeded_weights(config: &ModelConfig, seed: u64) -> Weights {
    init_weights(config, &SeededRng::new(seed, WEIGHT_STREAM))
}

fn image_tensor(i: usize, img: &Grid2D) -> Tensor {
    Tensor::new(format!("image{i}"), vec![img.side(), img.side(), img.channels()], img.values().to_vec())
        .expect("grid values match dims")
}

fn load_images(path: &PathBuf, side: usize, channels: usize, limit: Option<usize>) -> CliResult<Vec<Grid2D>> {
    let tensors = read_ftkr(path)?;
    let bad = |name: &str, reason: String| -> CliError {
        freqtoken::io::FtkrError::InvalidTensor { name: name.to_string(), reason }.into()
    };
    let mut images = Vec::new();
    for i in 0.. {
        if limit.is_some_and(|n| images.len() >= n) {
            break;
        }
        let name = format!("image{i}");
        let Some(t) = tensors.iter().find(|t| t.name == name) else { break };
        if t.dims != [side, side, channels] {
            return Err(bad(&name, format!("dims {:?}, model expects [{side}, {side}, {channels}]", t.dims)));
        }
        images.push(Grid2D::new(side, channels, t.data.clone())?);
    }
    if images.is_empty() {
        return Err(bad("image0", "no images in file".into()));
    }
    Ok(images)
}

/// Deterministic seed for a derived generator, mixed with splitmix64.
fn derive_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn join<T: ToString>(items: impl Iterator<Item = T>) -> String {
    items.map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

pub fn gen(ctx: &Context, with_weights: bool) -> CliResult<Artifacts> {
    let m = &ctx.config.model;
    let images = gen_synthetic(&ctx.config.synthetic, m.image_side(), m.in_channels, ctx.image_count(), ctx.config.seed)?;
    let tensors: Vec<Tensor> = images.iter().enumerate().map(|(i, g)| image_tensor(i, g)).collect();
    let mut a = Artifacts::default();
    a.bytes("images.ftkr", encode(&tensors)?);
    if with_weights {
        a.bytes("weights.ftkr", encode(&seeded_weights(m, ctx.config.seed).to_tensors())?);
    }
    a.bytes("config.json", format!("{}\n", ctx.config.to_json()).into_bytes());
    ctx.say(format!("generated {} images of {}x{}x{}", images.len(), m.image_side(), m.image_side(), m.in_channels));
    Ok(a)
}

#[derive(Serialize)]
struct VerifyRow<'a> {
    check: &'a str,
    trials: usize,
    violations: usize,
    worst_margin: f64,
    tolerance: f64,
    asserted: bool,
    passed: bool,
}

pub fn verify(ctx: &Context) -> CliResult<(Artifacts, Option<CliError>)> {
    let trials = ctx.trials.unwrap_or(DEFAULT_VERIFY_TRIALS);
    let report = run_suite(ctx.config.seed, trials)?;
    let rows: Vec<VerifyRow> = report
        .checks
        .iter()
        .map(|c| VerifyRow {
            check: &c.name,
            trials: c.trials,
            violations: c.violations,
            worst_margin: c.worst_margin,
            tolerance: c.tolerance,
            asserted: c.asserted,
            passed: c.violations == 0,
        })
        .collect();
    for r in &rows {
        let tag = if r.passed { "ok" } else if r.asserted { "FAIL" } else { "reported" };
        ctx.say(format!("{:<28} {:>6} violations  worst margin {:+.3e}  [{tag}]", r.check, r.violations, r.worst_margin));
    }
    let mut a = Artifacts::default();
    a.json("verify.json", &report);
    a.csv("verify.csv", &rows)?;
    let failure = (!report.passed()).then(|| {
        let failed: Vec<&str> =
            report.checks.iter().filter(|c| c.asserted && c.violations > 0).map(|c| c.name.as_str()).collect();
        CliError::VerificationFailed(failed.join(", "))
    });
    Ok((a, failure))
}

#[derive(Serialize)]
struct SpectrumRow {
    image: usize,
    layer: usize,
    tokens: usize,
    hf_band_energy: f64,
    hf_band_energy_fraction: f64,
    delta_log_amplitude: f64,
}

#[derive(Serialize)]
struct BandRow {
    image: usize,
    layer: usize,
    band: usize,
    amplitude: f64,
    energy_fraction: f64,
}

#[derive(Serialize)]
struct CollapseRow {
    image: usize,
    layer: usize,
    hf_norm: f64,
    lambda_hat: Option<f64>,
    cka_to_last: f64,
}

#[derive(Serialize)]
struct HfLfRow {
    image: usize,
    layer: usize,
    set_size: usize,
    hf_energy: f64,
    lf_energy: f64,
    hf_delta_log_amplitude: f64,
    lf_delta_log_amplitude: f64,
    hf_dc_similarity: f64,
    lf_dc_similarity: f64,
}

#[derive(Serialize)]
struct AwgnRow {
    image: usize,
    layer: usize,
    sigma: f64,
    hf_disruption: f64,
    lf_disruption: f64,
}

pub fn analyze(ctx: &Context, inputs: &Inputs) -> CliResult<Artifacts> {
    let model = ctx.model(inputs)?;
    let images = ctx.images(inputs)?;
    let cfg = &ctx.config;
    let (mut spectra, mut bands, mut collapse, mut hflf, mut awgn) = (vec![], vec![], vec![], vec![], vec![]);
    for (image, img) in images.iter().enumerate() {
        let out = model.forward(ForwardInput::Image(img), &cfg.schedule, &cfg.reducer)?;
        for rec in &out.trace.layers {
            let s = token_spectrum(&rec.output, &rec.layout)?;
            spectra.push(SpectrumRow {
                image,
                layer: rec.layer,
                tokens: rec.output.rows(),
                hf_band_energy: s.hf_band_energy,
                hf_band_energy_fraction: s.hf_band_energy_fraction,
                delta_log_amplitude: s.delta_log_amplitude,
            });
            for (band, (&amplitude, &energy_fraction)) in s.band_amplitude.iter().zip(&s.band_energy_fraction).enumerate() {
                bands.push(BandRow { image, layer: rec.layer, band, amplitude, energy_fraction });
            }
            let h = hf_lf_stats(rec, cfg.analysis.tau)?;
            hflf.push(HfLfRow {
                image,
                layer: h.layer,
                set_size: h.set_size,
                hf_energy: h.hf_energy,
                lf_energy: h.lf_energy,
                hf_delta_log_amplitude: h.hf_delta_log_amplitude,
                lf_delta_log_amplitude: h.lf_delta_log_amplitude,
                hf_dc_similarity: h.hf_dc_similarity,
                lf_dc_similarity: h.lf_dc_similarity,
            });
        }
        let c = collapse_report(&out.trace)?;
        for (k, rec) in out.trace.layers.iter().enumerate() {
            collapse.push(CollapseRow {
                image,
                layer: rec.layer,
                hf_norm: c.hf_norm[k],
                lambda_hat: c.lambda_hat.get(k).copied(),
                cka_to_last: c.cka_to_last[k],
            });
        }
        if cfg.analysis.awgn_sigma > 0.0 {
            for layer in 1..=cfg.model.depth {
                let rng = SeededRng::new(derive_seed(cfg.seed, image as u64, layer as u64), 0);
                let s = awgn_sensitivity(&model, ForwardInput::Image(img), layer, cfg.analysis.tau, cfg.analysis.awgn_sigma, &rng)?;
                awgn.push(AwgnRow { image, layer, sigma: s.sigma, hf_disruption: s.hf_disruption, lf_disruption: s.lf_disruption });
            }
        }
    }
    let mut a = Artifacts::default();
    a.csv("spectrum.csv", &spectra)?;
    a.csv("bands.csv", &bands)?;
    a.csv("collapse.csv", &collapse)?;
    a.csv("hflf.csv", &hflf)?;
    if cfg.analysis.awgn_sigma > 0.0 {
        a.csv("awgn.csv", &awgn)?;
    }
    ctx.say(format!("analyzed {} images over {} layers", images.len(), cfg.model.depth));
    Ok(a)
}

#[derive(Serialize)]
struct ReduceRow {
    image: usize,
    layer: usize,
    tokens_in: usize,
    tokens_out: usize,
    dc_tokens: usize,
    reduced: bool,
    hf_band_energy: f64,
    hf_band_energy_fraction: f64,
}

pub fn reduce(ctx: &Context, inputs: &Inputs, reducer: Option<&str>) -> CliResult<Artifacts> {
    let kind = match reducer {
        Some(name) => ReducerKind::parse(name).ok_or_else(|| {
            let names: Vec<&str> = ReducerKind::ALL.iter().map(|k| k.name()).collect();
            CliError::Usage(format!("unknown reducer {name:?}; expected one of {}", names.join(", ")))
        })?,
        None => ctx.config.reducer,
    };
    let model = ctx.model(inputs)?;
    let images = ctx.images(inputs)?;
    let mut rows = Vec::new();
    let mut final_tokens = Vec::new();
    for (image, img) in images.iter().enumerate() {
        let out = model.forward(ForwardInput::Image(img), &ctx.config.schedule, &kind)?;
        for rec in &out.trace.layers {
            let s = token_spectrum(&rec.output, &rec.layout)?;
            rows.push(ReduceRow {
                image,
                layer: rec.layer,
                tokens_in: rec.input.rows(),
                tokens_out: rec.output.rows(),
                dc_tokens: rec.layout.dc_indices().len(),
                reduced: rec.reduced,
                hf_band_energy: s.hf_band_energy,
                hf_band_energy_fraction: s.hf_band_energy_fraction,
            });
        }
        final_tokens.push(Tensor::from_mat(format!("tokens{image}"), &out.tokens));
    }
    let mut a = Artifacts::default();
    a.csv("reduce.csv", &rows)?;
    a.bytes("tokens.ftkr", encode(&final_tokens)?);
    ctx.say(format!("reduced {} images with {}", images.len(), kind.name()));
    Ok(a)
}

#[derive(Serialize)]
struct CompareRow {
    reducer: &'static str,
    image: usize,
    tokens: usize,
    hf_band_energy: f64,
    hf_band_energy_fraction: f64,
    cka_to_unreduced: f64,
}

#[derive(Serialize)]
struct CompareSummaryRow {
    reducer: &'static str,
    status: String,
    images: usize,
    mean_tokens: Option<f64>,
    mean_hf_band_energy: Option<f64>,
    mean_hf_band_energy_fraction: Option<f64>,
    mean_cka_to_unreduced: Option<f64>,
}

pub fn compare(ctx: &Context, inputs: &Inputs) -> CliResult<Artifacts> {
    let model = ctx.model(inputs)?;
    let images = ctx.images(inputs)?;
    let schedule = &ctx.config.schedule;
    let empty = ReductionSchedule::empty();
    let references = images
        .iter()
        .map(|img| {
            let out = model.forward_with(ForwardInput::Image(img), &empty, &ReducerKind::FrequencyAware, false)?;
            grid_features(&out.tokens, &out.layout)
        })
        .collect::<freqtoken::Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for kind in ReducerKind::ALL {
        let mut mine = Vec::new();
        let mut status = "ok".to_string();
        for (image, img) in images.iter().enumerate() {
            match model.forward_with(ForwardInput::Image(img), schedule, &kind, false) {
                Ok(out) => {
                    let s = token_spectrum(&out.tokens, &out.layout)?;
                    let cka = cka_or_degenerate(&grid_features(&out.tokens, &out.layout)?, &references[image])?;
                    mine.push(CompareRow {
                        reducer: kind.name(),
                        image,
                        tokens: out.tokens.rows(),
                        hf_band_energy: s.hf_band_energy,
                        hf_band_energy_fraction: s.hf_band_energy_fraction,
                        cka_to_unreduced: cka,
                    });
                }
                Err(e @ (Error::Layout(_) | Error::InvalidArgument(_))) => {
                    ctx.say(format!("{}: skipped ({e})", kind.name()));
                    status = "skipped".into();
                    mine.clear();
                    break;
                }
                Err(e) => return Err(e.into()),
            }
        }
        let n = mine.len();
        let mean = |f: fn(&CompareRow) -> f64| (n > 0).then(|| mine.iter().map(f).sum::<f64>() / n as f64);
        summary.push(CompareSummaryRow {
            reducer: kind.name(),
            status,
            images: n,
            mean_tokens: mean(|r| r.tokens as f64),
            mean_hf_band_energy: mean(|r| r.hf_band_energy),
            mean_hf_band_energy_fraction: mean(|r| r.hf_band_energy_fraction),
            mean_cka_to_unreduced: mean(|r| r.cka_to_unreduced),
        });
        rows.extend(mine);
    }
    let mut a = Artifacts::default();
    a.csv("compare.csv", &rows)?;
    a.csv("compare_summary.csv", &summary)?;
    Ok(a)
}

#[derive(Serialize)]
struct FlopsRow {
    stage: String,
    tokens_msa: Option<usize>,
    tokens_ffn: Option<usize>,
    msa_macs: Option<f64>,
    ffn_macs: Option<f64>,
    macs: f64,
}

pub fn flops(ctx: &Context, model: Option<&str>, three_stage: bool) -> CliResult<Artifacts> {
    let config = match model {
        Some(name) => ModelConfig::preset(name)
            .ok_or_else(|| CliError::Usage(format!("unknown model preset {name:?}; expected deit-t, deit-s or deit-b")))?,
        None => ctx.config.model.clone(),
    };
    let schedule = if three_stage { ReductionSchedule::three_stage() } else { ctx.config.schedule.clone() };
    let report = mac_count(&config, &schedule)?;
    let mut rows: Vec<FlopsRow> = report
        .layers
        .iter()
        .map(|l| FlopsRow {
            stage: format!("layer{}", l.layer),
            tokens_msa: Some(l.tokens_msa),
            tokens_ffn: Some(l.tokens_ffn),
            msa_macs: Some(l.msa_macs),
            ffn_macs: Some(l.ffn_macs),
            macs: l.msa_macs + l.ffn_macs,
        })
        .collect();
    for (stage, macs) in [("patch_embed", report.patch_embed_macs), ("head", report.head_macs), ("total", report.total_macs)] {
        rows.push(FlopsRow { stage: stage.into(), tokens_msa: None, tokens_ffn: None, msa_macs: None, ffn_macs: None, macs });
    }
    if !ctx.quiet {
        println!("total {:.4} GMACs", report.total_gmacs());
    }
    let mut a = Artifacts::default();
    a.csv("flops.csv", &rows)?;
    Ok(a)
}

#[derive(Serialize)]
struct SearchRow {
    layers: String,
    ratios: String,
    windows: String,
    mac: f64,
    proxy_acc: f64,
    score: f64,
    on_front: bool,
}

#[derive(Serialize)]
struct SearchSummary {
    space_size: usize,
    invalid: usize,
    evaluated: usize,
    front_size: usize,
    mac_base: f64,
    acc_base: f64,
}

pub fn search(ctx: &Context, inputs: &Inputs, workers: Option<usize>) -> CliResult<Artifacts> {
    let cfg = &ctx.config;
    let space = cfg.search.space.clone().unwrap_or_default();
    let evaluator = CkaProxyEvaluator::new(ctx.model(inputs)?, ctx_images_for_search(ctx, inputs)?)?;
    let options = SearchOptions {
        budget: ctx.trials.or(cfg.search.budget),
        seed: cfg.seed,
        workers: workers.or(cfg.search.workers),
    };
    let result = grid_search(&space, &cfg.model, &evaluator, &options)?;
    let rows: Vec<SearchRow> = result
        .candidates
        .iter()
        .map(|c| SearchRow {
            layers: join(c.schedule.steps.iter().map(|s| s.layer)),
            ratios: join(c.schedule.steps.iter().map(|s| s.rho)),
            windows: join(c.schedule.steps.iter().map(|s| s.window)),
            mac: c.mac_total,
            proxy_acc: c.proxy_acc,
            score: c.score,
            on_front: c.on_front,
        })
        .collect();
    let summary = SearchSummary {
        space_size: result.space_size,
        invalid: result.invalid,
        evaluated: result.candidates.len(),
        front_size: result.front().count(),
        mac_base: result.mac_base,
        acc_base: result.acc_base,
    };
    ctx.say(format!(
        "evaluated {} of {} candidates ({} invalid), {} on the front",
        summary.evaluated, summary.space_size, summary.invalid, summary.front_size
    ));
    let mut a = Artifacts::default();
    a.csv("search.csv", &rows)?;
    a.json("search.json", &summary);
    Ok(a)
}

/// The search spends `--trials` on its budget, so the batch comes from the
/// config.
fn ctx_images_for_search(ctx: &Context, inputs: &Inputs) -> CliResult<Vec<Grid2D>> {
    let m = &ctx.config.model;
    match &inputs.images {
        Some(path) => load_images(path, m.image_side(), m.in_channels, Some(ctx.config.batch_size)),
        None => Ok(gen_synthetic(&ctx.config.synthetic, m.image_side(), m.in_channels, ctx.config.batch_size, ctx.config.seed)?),
    }
}
