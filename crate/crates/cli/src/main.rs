use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use log::info;
use modalvox::convequiv::{equivalence_error, KernelKind};
use modalvox::eigensolve::{mixed_solve, random_block, read_modes, read_warmstart, write_modes, LobpcgOptions, WarmStart};
use modalvox::ffat::{read_ffat, write_ffat, write_png, FfatRange};
use modalvox::hexfem::{AssembledSystem, Material};
use modalvox::radiation::{Air, MAX_PANELS};
use modalvox::shapes::{bench_shapes, BenchShape, ShapeKind, DEFAULT_VOXEL_SIZE};
use modalvox::synth::{read_events, render, wav_export, DEFAULT_SAMPLE_RATE};
use modalvox::voxgrid::{voxelize, write_vgrid, TriMesh};
use modalvox_cli::bench::{bench_vibration, BenchOptions, SolverConfig, BENCH_TOLS};
use modalvox_cli::error::{Result, Stage};
use modalvox_cli::pipeline::{load_grid, modes_header, radiate_mode, run_pipeline, PipelineConfig, Source};

#[derive(Parser)]
#[command(name = "modalvox", version, about = "Voxel modal sound synthesis")]
struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Built-in material name or a JSON material file.
    #[arg(long, global = true, default_value = "ceramic")]
    material: String,
    /// Eigensolver residual tolerance.
    #[arg(long, global = true, default_value_t = 1e-6)]
    tol: f64,
    /// Number of audible modes.
    #[arg(long = "modes", global = true, default_value_t = 10)]
    modes: usize,
    /// Placement of the FFAT fitting spheres: far or near.
    #[arg(long, global = true, default_value = "far")]
    ffat_range: FfatRange,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct SourceArgs {
    /// Procedural shape: cube, plate, bar, hollow-box, l, blob:<seed>.
    #[arg(long, conflicts_with_all = ["grid", "mesh"])]
    shape: Option<ShapeKind>,
    /// `.vgrid` file.
    #[arg(long, conflicts_with = "mesh")]
    grid: Option<PathBuf>,
    /// STL or OBJ mesh, voxelized to --res along its longest axis.
    #[arg(long)]
    mesh: Option<PathBuf>,
    /// Shape or voxelization resolution.
    #[arg(long, default_value_t = 4)]
    res: u32,
    /// Voxel size of procedural shapes, meters.
    #[arg(long, default_value_t = DEFAULT_VOXEL_SIZE)]
    h: f64,
}

impl SourceArgs {
    fn source(&self) -> Result<Source> {
        match (&self.shape, &self.grid, &self.mesh) {
            (Some(kind), _, _) => Ok(Source::Shape { kind: *kind, res: self.res }),
            (_, Some(p), _) => Ok(Source::Grid(p.clone())),
            (_, _, Some(p)) => Ok(Source::Mesh { path: p.clone(), res: self.res }),
            _ => Err(modalvox::Error::InvalidInput("give one of --shape, --grid or --mesh".into())).stage("input"),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Voxelize a watertight mesh into a `.vgrid` file.
    Voxelize {
        mesh: PathBuf,
        #[arg(long, default_value_t = 32)]
        res: u32,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// List the benchmark shapes, or write one procedural shape.
    Shapes {
        kind: Option<ShapeKind>,
        #[arg(long, default_value_t = 8)]
        res: u32,
        #[arg(long, default_value_t = DEFAULT_VOXEL_SIZE)]
        h: f64,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Solve the audible vibration modes into a `.modes` file.
    Modal {
        #[command(flatten)]
        src: SourceArgs,
        /// random, krylov(k,J), or a `.modes` file of approximate vectors.
        #[arg(long, default_value = "krylov(20,1)")]
        warm: String,
        #[arg(long, default_value_t = 500)]
        max_iter: usize,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Compare convolution and assembled matrix products on random fields.
    CheckEquivalence {
        #[command(flatten)]
        src: SourceArgs,
        #[arg(long, default_value_t = 5)]
        trials: u64,
    },
    /// Radiate each mode of a `.modes` file into FFAT maps.
    Ffat {
        #[command(flatten)]
        src: SourceArgs,
        #[arg(long = "modes-file")]
        modes_file: PathBuf,
        #[arg(long, default_value_t = MAX_PANELS)]
        max_panels: usize,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Render impact events to a WAV file.
    Render {
        #[arg(long = "modes-file")]
        modes_file: PathBuf,
        /// Directory with mode_000.ffat, mode_001.ffat, …
        #[arg(long)]
        ffat_dir: PathBuf,
        /// JSON list of {t, vertex, dir, amp}.
        #[arg(long)]
        events: PathBuf,
        /// Listener position relative to the object center, `x,y,z` in meters.
        #[arg(long, value_parser = parse_point)]
        listener: [f64; 3],
        #[arg(long, default_value_t = DEFAULT_SAMPLE_RATE)]
        rate: u32,
        #[arg(long, default_value_t = 2.0)]
        duration: f64,
        #[arg(long)]
        no_normalize: bool,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Geometry to audio in one run.
    Pipeline {
        #[command(flatten)]
        src: SourceArgs,
        #[arg(long)]
        events: Option<PathBuf>,
        #[arg(long, value_parser = parse_point)]
        listener: Option<[f64; 3]>,
        #[arg(long, default_value = "krylov(20,1)")]
        warm: String,
        #[arg(long, default_value_t = DEFAULT_SAMPLE_RATE)]
        rate: u32,
        #[arg(long, default_value_t = 2.0)]
        duration: f64,
        #[arg(long)]
        no_normalize: bool,
        #[arg(long, default_value_t = MAX_PANELS)]
        max_panels: usize,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Vibration benchmark over the procedural shapes.
    Bench {
        /// Shapes as kind:res, comma separated (default: the benchmark set).
        #[arg(long, value_delimiter = ',')]
        shapes: Vec<String>,
        #[arg(long, value_delimiter = ';', default_values_t = ["lobpcg-random".to_string(), "mixed-krylov(20,1)".to_string()])]
        configs: Vec<String>,
        #[arg(long, value_delimiter = ',', default_values_t = BENCH_TOLS.to_vec())]
        tols: Vec<f64>,
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        #[arg(long, default_value_t = 6)]
        guard: usize,
        /// Leave out wall-clock columns so reruns are byte-identical.
        #[arg(long)]
        no_timing: bool,
        #[arg(short, long)]
        out: PathBuf,
    },
}

fn parse_point(s: &str) -> std::result::Result<[f64; 3], String> {
    let v: Vec<f64> = s.split(',').map(|p| p.trim().parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(|e| e.to_string())?;
    v.try_into().map_err(|_| "expected x,y,z".to_string())
}

fn parse_warm(s: &str, ndof_hint: usize) -> Result<WarmStart> {
    if s == "random" {
        return Ok(WarmStart::Random);
    }
    if let Some(inner) = s.strip_prefix("krylov(").and_then(|r| r.strip_suffix(')')) {
        let parts: Vec<_> = inner.split(',').map(|p| p.trim().parse::<usize>()).collect();
        if let [Ok(modes), Ok(depth)] = parts[..] {
            return Ok(WarmStart::Krylov { modes, depth });
        }
        return Err(modalvox::Error::InvalidInput(format!("bad warm start `{s}`"))).stage("input");
    }
    let f = File::open(s).stage("input")?;
    let v = read_warmstart(BufReader::new(f)).stage("input")?;
    if v.nrows() != ndof_hint {
        return Err(modalvox::Error::DimensionMismatch { expected: ndof_hint, actual: v.nrows() }).stage("input");
    }
    Ok(WarmStart::External(v))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).stage("export")?;
    }
    Ok(BufWriter::new(File::create(path).stage("export")?))
}

fn run(cli: Cli) -> Result<()> {
    let material = || Material::resolve(&cli.material).stage("input");
    match cli.command {
        Command::Voxelize { mesh, res, out } => {
            let m = TriMesh::load(&mesh).stage("geometry")?;
            let g = voxelize(&m, res).stage("voxelize")?;
            write_vgrid(create(&out)?, &g).stage("export")?;
            println!("{} voxels, h = {:.6} m", g.num_voxels(), g.h());
        }
        Command::Shapes { kind, res, h, out } => match kind {
            None => {
                for s in bench_shapes() {
                    let g = s.generate(h).stage("geometry")?;
                    println!("{:<14} {:>4} voxels {:>5} dof", s.name, g.num_voxels(), g.ndof());
                }
            }
            Some(kind) => {
                let g = load_grid(&Source::Shape { kind, res }, h)?;
                if let Some(out) = out {
                    write_vgrid(create(&out)?, &g).stage("export")?;
                }
                println!("{kind}-{res}: {} voxels, {} dof", g.num_voxels(), g.ndof());
            }
        },
        Command::Modal { src, warm, max_iter, out } => {
            let grid = Arc::new(load_grid(&src.source()?, src.h)?);
            let mat = material()?;
            let sys = AssembledSystem::build(grid.clone(), &mat).stage("assembly")?;
            let warm = parse_warm(&warm, sys.ndof())?;
            let opts = LobpcgOptions { modes: cli.modes, tol: cli.tol, seed: cli.seed, max_iter, ..Default::default() };
            let (modes, report) = mixed_solve(&sys, &warm, &opts).stage("modal")?;
            let header = modes_header(&mat, grid.h(), cli.seed, cli.tol, &report.provenance, &modes);
            write_modes(create(&out)?, &header, &modes).stage("export")?;
            println!(
                "{} modes in {} iterations ({}), converged: {}",
                modes.len(),
                report.iterations,
                report.provenance,
                report.converged
            );
            for (i, f) in modes.freqs_hz.iter().enumerate() {
                println!("  mode {i:>3}: {f:>12.3} Hz  residual {:.2e}", modes.residuals[i]);
            }
        }
        Command::CheckEquivalence { src, trials } => {
            let grid = load_grid(&src.source()?, src.h)?;
            let em = modalvox::hexfem::element_matrices(&material()?, grid.h()).stage("assembly")?;
            let mut worst: f64 = 0.0;
            for t in 0..trials {
                let x = random_block(grid.ndof(), 1, cli.seed + t);
                for kind in [KernelKind::Stiffness, KernelKind::Mass] {
                    let e = equivalence_error(&grid, &em, kind, x.as_slice()).stage("convequiv")?;
                    worst = worst.max(e);
                }
            }
            println!("max relative error over {trials} fields: {worst:.3e}");
            if !(worst < 1e-10) {
                return Err(modalvox::Error::Numerical(format!("equivalence error {worst:.3e} ≥ 1e-10"))).stage("convequiv");
            }
        }
        Command::Ffat { src, modes_file, max_panels, out } => {
            let grid = load_grid(&src.source()?, src.h)?;
            let (_, modes) = read_modes(BufReader::new(File::open(&modes_file).stage("input")?)).stage("input")?;
            if modes.ndof() != grid.ndof() {
                return Err(modalvox::Error::DimensionMismatch { expected: grid.ndof(), actual: modes.ndof() }).stage("input");
            }
            fs::create_dir_all(&out).stage("export")?;
            let air = Air::from_env().stage("input")?;
            for i in 0..modes.len() {
                let omega = modes.lambdas[i].max(0.0).sqrt();
                let (map, kind, panels, _) =
                    radiate_mode(&grid, modes.vectors.column(i).as_slice(), omega, air, cli.ffat_range, max_panels)
                        .stage("radiation")?;
                let path = out.join(format!("mode_{i:03}.ffat"));
                write_ffat(create(&path)?, &map).stage("export")?;
                write_png(&map, &path.with_extension("png")).stage("export")?;
                println!("mode {i:>3}: {:>10.2} Hz  {panels:>6} panels  {kind:?}", modes.freqs_hz[i]);
            }
        }
        Command::Render { modes_file, ffat_dir, events, listener, rate, duration, no_normalize, out } => {
            let (_, modes) = read_modes(BufReader::new(File::open(&modes_file).stage("input")?)).stage("input")?;
            let maps = (0..modes.len())
                .map(|i| {
                    let p = ffat_dir.join(format!("mode_{i:03}.ffat"));
                    read_ffat(BufReader::new(File::open(&p).stage("input")?)).stage("input")
                })
                .collect::<Result<Vec<_>>>()?;
            let ev = read_events(File::open(&events).stage("input")?).stage("input")?;
            let audio = render(&modes, &maps, &ev, listener, rate, duration).stage("render")?;
            wav_export(&audio, &out, !no_normalize).stage("export")?;
            println!("{} samples at {rate} Hz, peak {:.3e} Pa", audio.samples.len(), audio.peak());
        }
        Command::Pipeline { src, events, listener, warm, rate, duration, no_normalize, max_panels, out } => {
            let mut cfg = PipelineConfig::new(src.source()?, material()?, out);
            cfg.h = src.h;
            cfg.modes = cli.modes;
            cfg.tol = cli.tol;
            cfg.seed = cli.seed;
            cfg.range = cli.ffat_range;
            cfg.listener = listener;
            cfg.rate = rate;
            cfg.duration = duration;
            cfg.normalize = !no_normalize;
            cfg.max_panels = max_panels;
            cfg.air = Air::from_env().stage("input")?;
            cfg.warm = match warm.as_str() {
                w if w == "random" || w.starts_with("krylov(") => parse_warm(w, 0)?,
                path => {
                    let ndof = load_grid(&cfg.source, cfg.h)?.ndof();
                    parse_warm(path, ndof)?
                }
            };
            if let Some(p) = events {
                cfg.events = Some(read_events(File::open(&p).stage("input")?).stage("input")?);
            }
            let s = run_pipeline(&cfg)?;
            println!("{} voxels, {} modes ({} iterations)", s.voxels, s.freqs_hz.len(), s.solve.iterations);
            for t in &s.transfers {
                println!("  mode {:>3}: {:>10.2} Hz  {:?}", t.mode, t.freq_hz, t.kind);
            }
            println!("wrote {}", s.wav_file.display());
        }
        Command::Bench { shapes, configs, tols, seeds, guard, no_timing, out } => {
            let shapes = if shapes.is_empty() {
                bench_shapes()
            } else {
                shapes
                    .iter()
                    .map(|s| {
                        let (k, r) = s.rsplit_once(':').ok_or_else(|| {
                            modalvox::Error::InvalidInput(format!("shape `{s}` must be kind:res"))
                        })?;
                        let res = r.parse().map_err(|_| modalvox::Error::InvalidInput(format!("bad resolution in `{s}`")))?;
                        Ok(BenchShape::new(k.parse()?, res))
                    })
                    .collect::<modalvox::Result<Vec<_>>>()
                    .stage("input")?
            };
            let configs = configs.iter().map(|c| c.parse::<SolverConfig>()).collect::<modalvox::Result<Vec<_>>>().stage("input")?;
            let opts = BenchOptions {
                modes: cli.modes,
                guard,
                tols,
                seeds,
                base_seed: cli.seed,
                material: material()?,
                timings: !no_timing,
                ..Default::default()
            };
            let report = bench_vibration(&shapes, &configs, &opts)?;
            fs::create_dir_all(&out).stage("export")?;
            let md = report.to_markdown();
            fs::write(out.join("bench.md"), &md).stage("export")?;
            fs::write(out.join("bench.csv"), report.to_csv()?).stage("export")?;
            print!("{md}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot set thread count: {e}");
            return ExitCode::from(2);
        }
    }
    info!("seed {}", cli.seed);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

