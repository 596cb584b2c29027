use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{
    gen_synthetic_domains, inject_few_shot, make_eval_split, materialize, split_domains,
    LabeledSet, SyntheticSpec, DEFAULT_HOLDOUT_FRAC,
};
use crate::error::{Error, Result};
use crate::math::RngStream;
use crate::metrics::{
    accuracy, export_confidences, weight_divergence, ConfidenceRecord, DivergenceReport, EvalTag,
    ResultRow, ResultTable,
};
use crate::models::{ClientModel, ParamVector};

use super::hfedf::client_streams;
use super::{
    central_round, fedavg_round, fedprox_round, local_round, BaselineConfig, FederationState,
    HFedFConfig, HyperSpec, LocalTraining, RoundTrace,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Hfedf,
    HfedfNoGa,
    HfedfNoEma,
    HfedfNoGaNoEma,
    Fedavg,
    Fedprox,
    Local,
    Central,
}

impl Algorithm {
    pub const ALL: [Algorithm; 8] = [
        Algorithm::Hfedf,
        Algorithm::HfedfNoGa,
        Algorithm::HfedfNoEma,
        Algorithm::HfedfNoGaNoEma,
        Algorithm::Fedavg,
        Algorithm::Fedprox,
        Algorithm::Local,
        Algorithm::Central,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Hfedf => "hfedf",
            Algorithm::HfedfNoGa => "hfedf-no-ga",
            Algorithm::HfedfNoEma => "hfedf-no-ema",
            Algorithm::HfedfNoGaNoEma => "hfedf-no-ga-no-ema",
            Algorithm::Fedavg => "fedavg",
            Algorithm::Fedprox => "fedprox",
            Algorithm::Local => "local",
            Algorithm::Central => "central",
        }
    }

    pub fn is_hfedf(self) -> bool {
        matches!(
            self,
            Algorithm::Hfedf
                | Algorithm::HfedfNoGa
                | Algorithm::HfedfNoEma
                | Algorithm::HfedfNoGaNoEma
        )
    }

    /// The hFedF settings with this variant's ablation switches applied.
    pub fn hfedf_config(self, base: &HFedFConfig) -> HFedFConfig {
        let mut cfg = base.clone();
        if matches!(self, Algorithm::HfedfNoGa | Algorithm::HfedfNoGaNoEma) {
            cfg.gradalign_enabled = false;
        }
        if matches!(self, Algorithm::HfedfNoEma | Algorithm::HfedfNoGaNoEma) {
            cfg.ema_enabled = false;
        }
        cfg
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::config("algorithms", format!("unknown algorithm `{s}`")))
    }
}

/// Everything a grid cell needs besides its `(algorithm, seed, target)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub data: SyntheticSpec,
    pub n_clients: usize,
    /// Distinct source domains per client.
    pub domains_per_client: usize,
    #[serde(default)]
    pub few_shot_shots: usize,
    #[serde(default = "default_holdout")]
    pub holdout_frac: f64,
    #[serde(default = "default_hidden")]
    pub client_hidden: Vec<usize>,
    #[serde(default)]
    pub hypernet: HyperSpec,
    #[serde(default)]
    pub hfedf: HFedFConfig,
    #[serde(default)]
    pub baseline: BaselineConfig,
    #[serde(default = "default_eval_interval")]
    pub eval_interval: usize,
}

fn default_holdout() -> f64 {
    DEFAULT_HOLDOUT_FRAC
}
fn default_hidden() -> Vec<usize> {
    vec![32]
}
fn default_eval_interval() -> usize {
    5
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        let data = SyntheticSpec::default();
        Self {
            n_clients: data.n_domains - 1,
            domains_per_client: 1,
            data,
            few_shot_shots: 0,
            holdout_frac: default_holdout(),
            client_hidden: default_hidden(),
            hypernet: HyperSpec::default(),
            hfedf: HFedFConfig::default(),
            baseline: BaselineConfig::default(),
            eval_interval: default_eval_interval(),
        }
    }
}

impl ExperimentPlan {
    pub fn client_model(&self) -> ClientModel {
        ClientModel::new(
            self.data.feature_dim,
            self.client_hidden.clone(),
            self.data.n_classes,
        )
    }

    /// Checks cross-field constraints; errors name the offending field.
    pub fn validate(&self) -> Result<()> {
        self.hfedf.validate()?;
        self.baseline.validate()?;
        self.hypernet.validate()?;
        self.data.validate()?;
        let sources = self.data.n_domains.saturating_sub(1);
        if self.n_clients < 2 {
            return Err(Error::config("n_clients", "need at least 2 clients"));
        }
        if self.domains_per_client == 0 || self.domains_per_client > sources {
            return Err(Error::config(
                "d",
                format!("must lie in [1, {sources}] (source domain count)"),
            ));
        }
        if self.n_clients * self.domains_per_client < sources {
            return Err(Error::config(
                "d",
                format!(
                    "n_clients * d = {} is below the {sources} source domains",
                    self.n_clients * self.domains_per_client
                ),
            ));
        }
        if self.client_hidden.contains(&0) {
            return Err(Error::config("client_hidden", "layer widths must be >= 1"));
        }
        if self.eval_interval == 0 {
            return Err(Error::config("eval_interval", "must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.holdout_frac) {
            return Err(Error::config("holdout_frac", "must lie in [0, 1)"));
        }
        if self.few_shot_shots * self.n_clients > self.data.samples_per_domain {
            return Err(Error::config(
                "few_shot_shots",
                "shots * n_clients exceeds the target domain size",
            ));
        }
        Ok(())
    }
}

/// Labels of the random streams a cell draws from; the seed is the cell's
/// seed throughout.
pub struct StreamLabels;

impl StreamLabels {
    pub const DATA: &'static str = "data";

    pub fn split(target: impl fmt::Display) -> String {
        format!("split/t{target}")
    }
    pub fn holdout(target: impl fmt::Display) -> String {
        format!("holdout/t{target}")
    }
    pub fn few_shot(target: impl fmt::Display) -> String {
        format!("fewshot/t{target}")
    }
    pub fn hypernet_init(target: impl fmt::Display) -> String {
        format!("init/t{target}/hypernet")
    }
    pub fn client_init(target: impl fmt::Display) -> String {
        format!("init/t{target}/client")
    }
    pub fn shuffle_prefix(target: impl fmt::Display) -> String {
        format!("shuffle/t{target}")
    }
    pub fn server(target: impl fmt::Display) -> String {
        format!("server/t{target}")
    }

    /// All labels used for `target` with `n_clients` clients; any
    /// `Display` works, so a placeholder such as `"{t}"` yields templates.
    pub fn all(target: impl fmt::Display, n_clients: usize) -> Vec<String> {
        let mut out = vec![
            Self::DATA.to_string(),
            Self::split(&target),
            Self::holdout(&target),
            Self::few_shot(&target),
            Self::hypernet_init(&target),
            Self::client_init(&target),
            Self::server(&target),
            format!("{}/central", Self::shuffle_prefix(&target)),
        ];
        out.extend((0..n_clients).map(|i| format!("{}/c{i}", Self::shuffle_prefix(&target))));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellKey {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub target_domain: usize,
}

/// Extra outputs a cell may collect.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOptions {
    pub collect_traces: bool,
    pub collect_confidences: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellConfidence {
    /// `None` for a single shared model.
    pub client: Option<usize>,
    #[serde(flatten)]
    pub record: ConfidenceRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellOutcome {
    pub key: CellKey,
    pub rows: Vec<ResultRow>,
    pub traces: Vec<RoundTrace>,
    /// End-of-training divergence between per-client models.
    pub divergence: Option<DivergenceReport>,
    pub confidences: Vec<CellConfidence>,
    /// Set when training diverged; `rows` then hold what was evaluated
    /// before the failure.
    pub aborted: Option<String>,
}

/// Materialized train / validation / ood sets of one cell.
#[derive(Debug, Clone)]
pub struct CellData {
    pub train: Vec<LabeledSet>,
    pub val: Vec<LabeledSet>,
    pub ood: LabeledSet,
}

impl CellData {
    pub fn prepare(plan: &ExperimentPlan, seed: u64, target: usize) -> Result<CellData> {
        if target >= plan.data.n_domains {
            return Err(Error::OutOfRange {
                op: "target_domain",
                index: target,
                limit: plan.data.n_domains,
            });
        }
        let domains =
            gen_synthetic_domains(&plan.data, &mut RngStream::new(seed, StreamLabels::DATA))?;
        let sources: Vec<_> = domains
            .iter()
            .filter(|d| d.domain_id != target)
            .cloned()
            .collect();
        let split = split_domains(
            &sources,
            plan.n_clients,
            plan.domains_per_client,
            &mut RngStream::new(seed, StreamLabels::split(target)),
        )?;
        let mut eval = make_eval_split(
            &split,
            &domains,
            target,
            plan.holdout_frac,
            &mut RngStream::new(seed, StreamLabels::holdout(target)),
        )?;
        eval = inject_few_shot(
            &eval,
            target,
            plan.few_shot_shots,
            &mut RngStream::new(seed, StreamLabels::few_shot(target)),
        )?;
        let train = eval
            .train
            .iter()
            .map(|r| materialize(r, &domains))
            .collect::<Result<Vec<_>>>()?;
        let val = eval
            .val
            .iter()
            .map(|r| materialize(r, &domains))
            .collect::<Result<Vec<_>>>()?;
        let ood = materialize(&eval.ood, &domains)?;
        Ok(CellData { train, val, ood })
    }

    pub fn pooled_train(&self) -> Result<LabeledSet> {
        let refs: Vec<&LabeledSet> = self.train.iter().collect();
        LabeledSet::concat(&refs)
    }
}

/// Models under evaluation: one per client, or one shared.
enum Evaluated<'a> {
    PerClient(&'a [ParamVector]),
    Shared(&'a ParamVector),
}

fn mean_accuracy(
    model: &ClientModel,
    params: &Evaluated<'_>,
    data: &CellData,
) -> Result<(f64, f64)> {
    let n = data.val.len();
    let mut id = 0.0;
    let mut id_count = 0usize;
    let mut ood = 0.0;
    for i in 0..n {
        let p = match params {
            Evaluated::PerClient(ps) => &ps[i],
            Evaluated::Shared(p) => p,
        };
        if !data.val[i].is_empty() {
            id += accuracy(model, p, &data.val[i])?;
            id_count += 1;
        }
        if let Evaluated::PerClient(_) = params {
            ood += accuracy(model, p, &data.ood)?;
        }
    }
    let ood = match params {
        Evaluated::PerClient(_) => ood / n as f64,
        Evaluated::Shared(p) => accuracy(model, p, &data.ood)?,
    };
    let id = if id_count == 0 {
        0.0
    } else {
        id / id_count as f64
    };
    Ok((id, ood))
}

fn confidences(
    model: &ClientModel,
    params: &Evaluated<'_>,
    data: &CellData,
) -> Result<Vec<CellConfidence>> {
    let mut out = Vec::new();
    let mut push = |client, p: &ParamVector, set: &LabeledSet, tag| -> Result<()> {
        for record in export_confidences(model, p, set, tag)? {
            out.push(CellConfidence { client, record });
        }
        Ok(())
    };
    match params {
        Evaluated::PerClient(ps) => {
            for (i, p) in ps.iter().enumerate() {
                push(Some(i), p, &data.val[i], EvalTag::Id)?;
                push(Some(i), p, &data.ood, EvalTag::Ood)?;
            }
        }
        Evaluated::Shared(p) => {
            for v in &data.val {
                push(None, p, v, EvalTag::Id)?;
            }
            push(None, p, &data.ood, EvalTag::Ood)?;
        }
    }
    Ok(out)
}

struct CellRun<'a> {
    plan: &'a ExperimentPlan,
    key: CellKey,
    model: ClientModel,
    data: CellData,
    rows: Vec<ResultRow>,
}

impl CellRun<'_> {
    fn is_eval_round(&self, r: usize) -> bool {
        r.is_multiple_of(self.plan.eval_interval) || r == self.plan.hfedf.rounds
    }

    fn record(&mut self, round: usize, params: Evaluated<'_>) -> Result<()> {
        let (id_acc, ood_acc) = mean_accuracy(&self.model, &params, &self.data)?;
        self.rows.push(ResultRow {
            algorithm: self.key.algorithm.name().to_string(),
            seed: self.key.seed,
            target_domain: self.key.target_domain,
            round,
            id_acc,
            ood_acc,
        });
        Ok(())
    }

    fn local_opts(&self, proximal: bool) -> LocalTraining {
        let b = &self.plan.baseline;
        LocalTraining {
            epochs: self.plan.hfedf.local_epochs,
            lr: b.client_lr,
            batch_size: self.plan.hfedf.batch_size,
            weight_decay: if proximal {
                b.prox_weight_decay
            } else {
                b.client_weight_decay
            },
            prox: if proximal { b.prox_mu } else { 0.0 },
        }
    }
}

/// Trains one `(algorithm, seed, target)` cell and evaluates it at round 0,
/// every `eval_interval` rounds and at the end.
///
/// Configuration and shape errors are returned as `Err`; numeric divergence
/// during training ends the cell early with `aborted` set.
pub fn run_cell(plan: &ExperimentPlan, key: CellKey, opts: RunOptions) -> Result<CellOutcome> {
    plan.validate()?;
    let data = CellData::prepare(plan, key.seed, key.target_domain)?;
    let mut run = CellRun {
        plan,
        key,
        model: plan.client_model(),
        data,
        rows: Vec::new(),
    };
    let mut traces = Vec::new();
    let t = key.target_domain;
    let seed = key.seed;
    let n = plan.n_clients;
    let rounds = plan.hfedf.rounds;

    let mut aborted = None;
    let mut final_params: Vec<ParamVector> = Vec::new();
    let mut shared: Option<ParamVector> = None;

    let mut outcome: Result<()> = (|| {
        if key.algorithm.is_hfedf() {
            let mut state = FederationState::new(
                key.algorithm.hfedf_config(&plan.hfedf),
                run.model.clone(),
                plan.hypernet.resolve(n),
                &mut RngStream::new(seed, StreamLabels::hypernet_init(t)),
                client_streams(seed, &StreamLabels::shuffle_prefix(t), n),
                RngStream::new(seed, StreamLabels::server(t)),
            )?;
            final_params = state.client_params()?;
            run.record(0, Evaluated::PerClient(&final_params))?;
            for r in 1..=rounds {
                let trace = state.round(&run.data.train)?;
                if opts.collect_traces {
                    traces.push(trace);
                }
                if run.is_eval_round(r) {
                    final_params = state.client_params()?;
                    run.record(r, Evaluated::PerClient(&final_params))?;
                }
            }
            final_params = state.client_params()?;
            return Ok(());
        }

        let init = run
            .model
            .init(&mut RngStream::new(seed, StreamLabels::client_init(t)));
        let mut rngs = client_streams(seed, &StreamLabels::shuffle_prefix(t), n);
        match key.algorithm {
            Algorithm::Local => {
                final_params = vec![init; n];
                run.record(0, Evaluated::PerClient(&final_params))?;
                let opts = run.local_opts(false);
                for r in 1..=rounds {
                    local_round(
                        &run.model,
                        &mut final_params,
                        &run.data.train,
                        &opts,
                        &mut rngs,
                    )?;
                    if run.is_eval_round(r) {
                        run.record(r, Evaluated::PerClient(&final_params))?;
                    }
                }
            }
            Algorithm::Central => {
                let pooled = run.data.pooled_train()?;
                let mut params = init;
                let mut rng =
                    RngStream::new(seed, format!("{}/central", StreamLabels::shuffle_prefix(t)));
                run.record(0, Evaluated::Shared(&params))?;
                let opts = run.local_opts(false);
                for r in 1..=rounds {
                    central_round(&run.model, &mut params, &pooled, &opts, &mut rng)?;
                    if run.is_eval_round(r) {
                        run.record(r, Evaluated::Shared(&params))?;
                    }
                }
                shared = Some(params);
            }
            Algorithm::Fedavg | Algorithm::Fedprox => {
                let proximal = key.algorithm == Algorithm::Fedprox;
                let opts = run.local_opts(proximal);
                let mut global = init;
                run.record(0, Evaluated::Shared(&global))?;
                for r in 1..=rounds {
                    let (next, _) = if proximal {
                        fedprox_round(&run.model, &global, &run.data.train, &opts, &mut rngs)?
                    } else {
                        fedavg_round(&run.model, &global, &run.data.train, &opts, &mut rngs)?
                    };
                    global = next;
                    if run.is_eval_round(r) {
                        run.record(r, Evaluated::Shared(&global))?;
                    }
                }
                shared = Some(global);
            }
            _ => unreachable!("hfedf variants handled above"),
        }
        Ok(())
    })();

    if let Err(Error::NonFinite { context }) = outcome {
        aborted = Some(format!("non-finite value in {context}"));
        outcome = Ok(());
    }
    outcome?;

    let mut divergence = None;
    let mut confs = Vec::new();
    if aborted.is_none() {
        if final_params.len() >= 2 {
            divergence = Some(weight_divergence(&final_params, &run.model.layout())?);
        }
        if opts.collect_confidences {
            let evaluated = match &shared {
                Some(p) => Evaluated::Shared(p),
                None => Evaluated::PerClient(&final_params),
            };
            confs = confidences(&run.model, &evaluated, &run.data)?;
        }
    }
    Ok(CellOutcome {
        key,
        rows: run.rows,
        traces,
        divergence,
        confidences: confs,
        aborted,
    })
}

/// Canonical cell order: algorithm, then seed, then target domain.
pub fn grid(plan: &ExperimentPlan, algorithms: &[Algorithm], seeds: &[u64]) -> Vec<CellKey> {
    let mut keys = Vec::new();
    for &algorithm in algorithms {
        for &seed in seeds {
            for target_domain in 0..plan.data.n_domains {
                keys.push(CellKey {
                    algorithm,
                    seed,
                    target_domain,
                });
            }
        }
    }
    keys
}

/// Runs the full grid serially.
pub fn run_experiment(
    plan: &ExperimentPlan,
    algorithms: &[Algorithm],
    seeds: &[u64],
    opts: RunOptions,
) -> Result<(ResultTable, Vec<CellOutcome>)> {
    plan.validate()?;
    let mut outcomes = Vec::new();
    let mut table = ResultTable::default();
    for key in grid(plan, algorithms, seeds) {
        let outcome = run_cell(plan, key, opts)?;
        table.rows.extend(outcome.rows.iter().cloned());
        outcomes.push(outcome);
    }
    Ok((table, outcomes))
}
