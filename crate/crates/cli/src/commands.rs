use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Parser;
use fovea::corpus::{
    generate_corpus, load_corpus, load_fixations, save_corpus, write_fixations, CorpusFile, Layout, OutOfBounds,
};
use fovea::eval::{evaluate, fixation_heatmap, scored_points};
use fovea::foveation::foveate_image;
use fovea::geometry::pixels_per_degree;
use fovea::oracle::{Scene, SyntheticOracle};
use fovea::policy::{train_policy_chain, InitialPreset, PolicyChain, RewardKind};
use fovea::scanpath::{
    map_scanpath, policy_scanpath, random_scanpath, FixationSequence, PriorityMap, IOR_DEEPGAZE, IOR_GBVS,
    IOR_ITTI_KOCH, IOR_RANDOM,
};
use fovea::{FieldGeometry, FixationPoint, Image};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::config::FileConfig;
use crate::manifest::{sha256_file, Manifest, Run, MANIFEST};
use crate::{
    Cli, Command, CorpusArgs, EvalArgs, FieldArgs, FoveateArgs, LayoutArg, ModeArg, ReplayArgs, RewardArg,
    ScanpathArgs, TrainArgs,
};

/// Bad flags or flag combinations (exit code 2).
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub fn run(cli: &Cli, argv: Vec<String>) -> anyhow::Result<()> {
    if cli.threads > 0 {
        // a second call (replay) keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global();
    }
    let file = FileConfig::load(cli.config.as_deref())?;
    let dir = cli.run_dir.clone().unwrap_or_else(|| PathBuf::from("run"));
    let name = match &cli.command {
        Command::Foveate(_) => "foveate",
        Command::Corpus(_) => "corpus",
        Command::Train(_) => "train",
        Command::Scanpath(_) => "scanpath",
        Command::Eval(_) => "eval",
        Command::Replay(a) => return replay(cli, a),
    };
    let mut run = Run::new(dir, name, argv, cli.seed, rayon::current_num_threads())?;
    if let Some(c) = &cli.config {
        run.input(c)?;
    }
    match &cli.command {
        Command::Foveate(a) => foveate(&mut run, a)?,
        Command::Corpus(a) => corpus(&mut run, a, &file, cli.seed)?,
        Command::Train(a) => train(&mut run, a, &file, cli.seed)?,
        Command::Scanpath(a) => scanpath(&mut run, a, cli.seed)?,
        Command::Eval(a) => eval(&mut run, a, &file, cli.seed)?,
        Command::Replay(_) => unreachable!(),
    }
    let m = run.finish()?;
    println!("{}", serde_json::to_string_pretty(&m.summary)?);
    Ok(())
}

fn ppd_of(f: &FieldArgs) -> anyhow::Result<u32> {
    match f.ppd {
        Some(0) => Err(usage("--ppd must be positive")),
        Some(p) => Ok(p),
        None => Ok(pixels_per_degree(f.observer_distance, f.pixel_pitch)?),
    }
}

fn parse_pair(s: &str, what: &str) -> anyhow::Result<(f64, f64)> {
    let bad = || usage(format!("{what} must be X,Y in pixels, got {s:?}"));
    let (x, y) = s.split_once(',').ok_or_else(bad)?;
    Ok((x.trim().parse().map_err(|_| bad())?, y.trim().parse().map_err(|_| bad())?))
}

fn foveate(run: &mut Run, a: &FoveateArgs) -> anyhow::Result<()> {
    let ppd = ppd_of(&a.field)?;
    let fixations = a
        .fixations
        .iter()
        .map(|s| parse_pair(s, "--fixation"))
        .collect::<anyhow::Result<Vec<_>>>()?;
    run.input(&a.image)?;
    let image = Image::load(&a.image).with_context(|| format!("loading {}", a.image.display()))?;
    let out = foveate_image(&image, &fixations, a.alpha, ppd)?;
    out.save(run.output(&a.out)?)?;
    run.manifest.config = json!({ "alpha_dva": a.alpha, "ppd": ppd, "fixations_px": fixations });
    run.manifest.summary = json!({ "width": out.width(), "height": out.height(), "output": a.out });
    Ok(())
}

fn corpus(run: &mut Run, a: &CorpusArgs, file: &FileConfig, seed: u64) -> anyhow::Result<()> {
    let mut spec = file.corpus.clone();
    spec.seed = seed;
    let f = spec.field;
    let (w, h) = (a.width.unwrap_or(f.width), a.height.unwrap_or(f.height));
    spec.field = if a.field.ppd.is_some() {
        FieldGeometry::with_ppd(ppd_of(&a.field)?, w, h)?
    } else if a.width.is_some() || a.height.is_some() {
        FieldGeometry::new(a.field.observer_distance, a.field.pixel_pitch, w, h)?
    } else {
        f
    };
    if let Some(n) = a.scenes {
        spec.n_scenes = n;
    }
    if let Some(v) = a.min_regions {
        spec.min_regions = v;
    }
    if let Some(v) = a.max_regions {
        spec.max_regions = v;
    }
    if let Some(v) = a.size_min {
        spec.size_range.0 = v;
    }
    if let Some(v) = a.size_max {
        spec.size_range.1 = v;
    }
    if let Some(l) = a.layout {
        spec.layout = match l {
            LayoutArg::Free => Layout::Free,
            LayoutArg::Quadrants => Layout::Quadrants,
        };
    }
    if let Some(v) = a.su_i_max_weight {
        spec.su_i_max_weight = v;
    }
    if a.salient_gap.is_some() {
        spec.salient_gap = a.salient_gap;
    }
    let scenes = generate_corpus(&spec)?;
    save_corpus(&run.output("corpus.json")?, &CorpusFile::new(spec.field, scenes.clone()))?;
    run.manifest.config = serde_json::to_value(&spec)?;
    let regions: usize = scenes.iter().map(|s| s.regions.len()).sum();
    run.manifest.summary = json!({ "scenes": scenes.len(), "regions": regions, "ppd": spec.field.ppd });
    Ok(())
}

fn train(run: &mut Run, a: &TrainArgs, file: &FileConfig, seed: u64) -> anyhow::Result<()> {
    run.input(&a.corpus)?;
    let corpus = load_corpus(&a.corpus)?;
    let mut cfg = file.training.clone();
    macro_rules! set {
        ($flag:expr, $field:expr) => {
            if let Some(v) = $flag {
                $field = v;
            }
        };
    }
    set!(a.epochs, cfg.epochs);
    set!(a.fixations, cfg.n_fixations);
    set!(a.batch_size, cfg.batch_size);
    set!(a.temperature, cfg.temperature);
    set!(a.lr, cfg.learning_rate);
    set!(a.weight_decay, cfg.weight_decay);
    set!(a.sigma, cfg.smooth_sigma);
    set!(a.alpha, cfg.alpha);
    set!(a.descriptions, cfg.descriptions);
    if let Some(c) = a.channels {
        cfg.features.channels = c;
        cfg.widths = None;
    }
    let reward = match a.reward {
        RewardArg::Semantic => RewardKind::Semantic,
        RewardArg::Entropy => RewardKind::Entropy,
    };
    let oracle = SyntheticOracle::new(file.oracle.clone());
    let (chain, log) = train_policy_chain(&corpus.scenes, &corpus.field, &cfg, reward, &oracle, seed)?;
    let ck = run.output("checkpoint.json")?;
    chain.save(&ck)?;
    let lp = run.output("training_log.csv")?;
    let mut w = csv::Writer::from_path(&lp)?;
    for b in &log.batches {
        w.serialize(b)?;
    }
    w.flush()?;
    run.manifest.config = json!({ "training": cfg, "oracle": file.oracle, "reward": format!("{reward:?}").to_lowercase() });
    let last: Vec<Option<f64>> = (1..=cfg.n_fixations).map(|j| log.checkpoints(j, 1).first().copied()).collect();
    run.manifest.summary = json!({
        "checkpoint_sha256": sha256_file(&ck)?,
        "batches": log.batches.len(),
        "mean_reward_per_step": last,
        "flagged_traces": log.flagged(),
    });
    Ok(())
}

fn initial_point(spec: &str, field: &FieldGeometry, scene: &Scene) -> anyhow::Result<FixationPoint> {
    let preset = match spec {
        "center" => InitialPreset::Center,
        "below-center" => InitialPreset::TESTING_BELOW_CENTER,
        "training-below-center" => InitialPreset::TRAINING_BELOW_CENTER,
        "top-left" => InitialPreset::TopLeft,
        "top-right" => InitialPreset::TopRight,
        "bottom-left" => InitialPreset::BottomLeft,
        "bottom-right" => InitialPreset::BottomRight,
        other => {
            let (x, y) = parse_pair(other, "--initial")?;
            InitialPreset::Point { x, y }
        }
    };
    Ok(preset.point(field, &scene.placement)?)
}

fn default_ior(source: &str) -> Option<f64> {
    match source.to_ascii_lowercase().as_str() {
        "deepgaze" | "deepgaze-iie" => Some(IOR_DEEPGAZE),
        "gbvs" => Some(IOR_GBVS),
        "itti-koch" | "ittikoch" => Some(IOR_ITTI_KOCH),
        _ => None,
    }
}

fn find_map(dir: &Path, id: &str) -> Option<PathBuf> {
    ["png", "csv", "pgm", "txt"]
        .iter()
        .map(|e| dir.join(format!("{id}.{e}")))
        .find(|p| p.exists())
}

fn scanpath(run: &mut Run, a: &ScanpathArgs, seed: u64) -> anyhow::Result<()> {
    run.input(&a.corpus)?;
    let corpus = load_corpus(&a.corpus)?;
    let field = corpus.field;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seqs = Vec::new();
    let ior;
    match a.mode {
        ModeArg::Policy => {
            let path = a.checkpoint.as_ref().ok_or_else(|| usage("policy mode needs --checkpoint"))?;
            run.input(path)?;
            let chain = PolicyChain::load(path)?;
            if chain.field != field {
                return Err(usage("checkpoint and corpus use different fields"));
            }
            ior = None;
            for s in &corpus.scenes {
                seqs.push(policy_scanpath(&chain, s, initial_point(&a.initial, &field, s)?)?);
            }
        }
        ModeArg::Map => {
            let dir = a.maps.as_ref().ok_or_else(|| usage("map mode needs --maps"))?;
            let d = a
                .ior
                .or_else(|| default_ior(&a.source))
                .ok_or_else(|| usage(format!("no default IOR for source {:?}; pass --ior", a.source)))?;
            ior = Some(d);
            for s in &corpus.scenes {
                let Some(p) = find_map(dir, &s.id) else {
                    bail!(fovea::Error::Data(format!("no map for scene {} in {}", s.id, dir.display())));
                };
                run.input(&p)?;
                let map = PriorityMap::load(&p, a.source.clone())?;
                let init = initial_point(&a.initial, &field, s)?;
                let mut q = map_scanpath(&map, a.fixations, d, a.smooth, &field, Some(init), &mut rng)
                    .map_err(|e| e.in_scene(&s.id))?;
                q.scene_id = s.id.clone();
                seqs.push(q);
            }
        }
        ModeArg::Random => {
            let d = a.ior.unwrap_or(IOR_RANDOM);
            ior = Some(d);
            for s in &corpus.scenes {
                let init = initial_point(&a.initial, &field, s)?;
                for k in 0..a.runs {
                    let mut q = random_scanpath(&field, &s.placement, a.fixations, d, Some(init), &mut rng)
                        .map_err(|e| e.in_scene(&s.id))?;
                    q.scene_id = s.id.clone();
                    q.subject_id = Some(format!("run{k:04}"));
                    seqs.push(q);
                }
            }
        }
    }
    write_fixations(&run.output("fixations.csv")?, &seqs)?;
    let steps: Vec<f64> = seqs.iter().filter_map(FixationSequence::mean_step).collect();
    let mean_step = steps.iter().sum::<f64>() / steps.len().max(1) as f64;
    run.manifest.config = json!({
        "mode": format!("{:?}", a.mode).to_lowercase(),
        "source": a.source,
        "ior_dva": ior,
        "smooth_dva": a.smooth,
        "fixations": a.fixations,
        "runs": a.runs,
        "initial": a.initial,
    });
    run.manifest.summary = json!({
        "sequences": seqs.len(),
        "flagged": seqs.iter().filter(|s| s.flagged).count(),
        "mean_step_dva": field.px_to_dva(mean_step),
    });
    Ok(())
}

fn render(map: &PriorityMap, path: &Path) -> anyhow::Result<()> {
    let mut plane = map.to_plane();
    plane.data.iter_mut().for_each(|v| *v *= 255.0);
    Image::gray(plane).save(path)?;
    Ok(())
}

fn eval(run: &mut Run, a: &EvalArgs, file: &FileConfig, seed: u64) -> anyhow::Result<()> {
    run.input(&a.corpus)?;
    let corpus = load_corpus(&a.corpus)?;
    let field = corpus.field;
    run.input(&a.human)?;
    let human = load_fixations(&a.human, Some(&field), OutOfBounds::Drop)?;
    let mut models = BTreeMap::new();
    for m in &a.models {
        let (name, path) = m
            .split_once('=')
            .ok_or_else(|| usage(format!("--model takes NAME=CSV, got {m:?}")))?;
        let path = Path::new(path);
        run.input(path)?;
        let mut seqs = load_fixations(path, Some(&field), OutOfBounds::Drop)?;
        seqs.iter_mut().for_each(|s| s.source = name.to_string());
        if models.insert(name.to_string(), seqs).is_some() {
            return Err(usage(format!("model {name} given twice")));
        }
    }
    let mut cfg = file.eval.clone();
    cfg.seed = seed;
    if a.baseline.is_some() {
        cfg.baseline = a.baseline.clone();
    }
    if let Some(v) = a.tolerance {
        cfg.tolerance_dva = v;
    }
    if let Some(v) = a.center_bias {
        cfg.center_bias_dva = v;
    }
    if let Some(v) = a.heatmap_sigma {
        cfg.heatmap_sigma_dva = v;
    }
    if let Some(v) = a.fixations {
        cfg.n_fixations = v;
    }
    if let Some(v) = a.resamples {
        cfg.frequency_resamples = v;
    }
    if let Some(v) = a.map_resamples {
        cfg.map_resamples = v;
    }
    if let Some(b) = &cfg.baseline {
        if !models.contains_key(b) {
            return Err(usage(format!("baseline {b} is not among the --model names")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = evaluate(&corpus.scenes, &field, &human, &models, &cfg, &mut rng)?;

    for scene in corpus.scenes.iter().take(a.heatmaps) {
        let sources = std::iter::once(("human", &human)).chain(models.iter().map(|(k, v)| (k.as_str(), v)));
        for (name, seqs) in sources {
            let own: Vec<&FixationSequence> = seqs.iter().filter(|s| s.scene_id == scene.id).collect();
            if own.is_empty() {
                continue;
            }
            let map = fixation_heatmap(&scored_points(&own, cfg.n_fixations), &field, cfg.heatmap_sigma_dva)?;
            let rel = format!("heatmaps/{}_{}.png", scene.id, name);
            render(&map, &run.output(&rel)?)?;
            report.heatmaps.push(rel);
        }
    }
    std::fs::write(run.output("report.json")?, report.to_json()?)?;
    report.write_frequency_csv(&run.output("frequencies.csv")?)?;
    run.manifest.config = serde_json::to_value(&cfg)?;
    run.manifest.summary = json!(report
        .scores
        .iter()
        .map(|s| (s.source.clone(), json!({ "nll_indep": s.nll_indep, "nll_mvn": s.nll_mvn, "nnll_indep": s.nnll_indep, "auc": s.auc, "cc": s.cc })))
        .collect::<serde_json::Map<_, _>>());
    Ok(())
}

/// Re-run the command recorded in a manifest and compare output hashes.
fn replay(cli: &Cli, a: &ReplayArgs) -> anyhow::Result<()> {
    let orig = Manifest::load(&a.manifest)?;
    let orig_dir = a
        .manifest
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();
    let here = std::env::current_dir()?;
    let out = match &cli.run_dir {
        Some(d) => here.join(d),
        None => {
            let mut name = orig_dir.file_name().unwrap_or_default().to_os_string();
            name.push(".replay");
            here.join(orig_dir.with_file_name(name))
        }
    };
    let orig_dir = here.join(&orig_dir);
    let mut parsed = Cli::try_parse_from(std::iter::once("fovea".to_string()).chain(orig.argv.iter().cloned()))
        .map_err(|e| usage(format!("manifest arguments no longer parse: {e}")))?;
    if matches!(parsed.command, Command::Replay(_)) {
        return Err(usage("a replay manifest cannot be replayed"));
    }
    parsed.run_dir = Some(out.clone());
    std::env::set_current_dir(&orig.cwd).with_context(|| format!("entering {}", orig.cwd.display()))?;
    for i in &orig.inputs {
        let now = sha256_file(Path::new(&i.path))?;
        if now != i.sha256 {
            bail!(fovea::Error::Data(format!("input {} changed since the run", i.path)));
        }
    }
    let result = run(&parsed, orig.argv.clone());
    std::env::set_current_dir(&here)?;
    result?;
    let new = Manifest::load(&out.join(MANIFEST))?;
    let mismatched: Vec<&str> = orig
        .outputs
        .iter()
        .filter(|o| !new.outputs.contains(o))
        .map(|o| o.path.as_str())
        .collect();
    if !mismatched.is_empty() {
        bail!(fovea::Error::Data(format!(
            "outputs differ from {}: {}",
            orig_dir.display(),
            mismatched.join(", ")
        )));
    }
    println!("replayed {} outputs identically into {}", orig.outputs.len(), out.display());
    Ok(())
}
