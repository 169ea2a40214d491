use phenorag_core::config::{PartialConfig, WINDOW_CHOICES};
use phenorag_core::{RunConfig, Strategy as Strat, Task};
use proptest::prelude::*;

#[test]
fn defaults_snapshot() {
    let c = RunConfig::default();
    assert_eq!(c.chunk_size, 512);
    assert_eq!(c.dense_k, 3);
    assert_eq!(c.rerank_keep, 1);
    assert_eq!(c.context_window, 2048);
    assert_eq!(WINDOW_CHOICES, [2048, 5120]);
    assert_eq!(c.list_length, 10);
    assert_eq!(c.temperature, 0.0);
    assert_eq!(c.strategy, Strat::Base);
    assert_eq!(c.task, Task::Gene);
    c.validate().unwrap();
}

#[test]
fn unknown_file_keys_rejected() {
    assert!(PartialConfig::from_toml_str("dense_kk = 4").is_err());
    let p = PartialConfig::from_toml_str("dense_k = 4\nstrategy = \"cot-rag\"").unwrap();
    assert_eq!(p.dense_k, Some(4));
    assert_eq!(p.strategy, Some(Strat::CotRag));
}

#[test]
fn list_length_is_fixed() {
    let cli = PartialConfig { list_length: Some(5), ..Default::default() };
    assert!(RunConfig::resolve(&PartialConfig::default(), &PartialConfig::default(), &cli).is_err());
}

fn layer() -> impl Strategy<Value = PartialConfig> {
    (
        prop::option::of(1usize..20),
        prop::option::of(any::<u64>()),
        prop::option::of(prop::sample::select(vec![2048usize, 5120])),
        prop::option::of(prop::sample::select(Strat::ALL.to_vec())),
        prop::option::of("[a-z0-9-]{1,12}"),
        prop::option::of(any::<bool>()),
        prop::option::of(0u32..10),
    )
        .prop_map(|(dense_k, seed, window, strategy, model, clamp, retries)| PartialConfig {
            dense_k,
            seed,
            context_window: window,
            strategy,
            llm_model: model,
            clamp_negative: clamp,
            max_retries: retries,
            ..Default::default()
        })
}

fn as_env(p: &PartialConfig) -> Vec<(String, String)> {
    let mut v = Vec::new();
    let mut put = |k: &str, val: Option<String>| {
        if let Some(val) = val {
            v.push((format!("PHENORAG_{}", k.to_uppercase()), val));
        }
    };
    put("dense_k", p.dense_k.map(|x| x.to_string()));
    put("seed", p.seed.map(|x| x.to_string()));
    put("context_window", p.context_window.map(|x| x.to_string()));
    put("strategy", p.strategy.map(|x| x.to_string()));
    put("llm_model", p.llm_model.clone());
    put("clamp_negative", p.clamp_negative.map(|x| x.to_string()));
    put("max_retries", p.max_retries.map(|x| x.to_string()));
    v
}

fn as_toml(p: &PartialConfig) -> String {
    let mut s = String::new();
    if let Some(x) = p.dense_k { s += &format!("dense_k = {x}\n"); }
    if let Some(x) = p.seed { s += &format!("seed = {}\n", x as i64 as u64 & (i64::MAX as u64)); }
    if let Some(x) = p.context_window { s += &format!("context_window = {x}\n"); }
    if let Some(x) = p.strategy { s += &format!("strategy = \"{x}\"\n"); }
    if let Some(x) = &p.llm_model { s += &format!("llm_model = \"{x}\"\n"); }
    if let Some(x) = p.clamp_negative { s += &format!("clamp_negative = {x}\n"); }
    if let Some(x) = p.max_retries { s += &format!("max_retries = {x}\n"); }
    s
}

proptest! {
    #[test]
    fn cli_over_env_over_file_over_default(file in layer(), env in layer(), cli in layer()) {
        let c = RunConfig::resolve(&file, &env, &cli).unwrap();
        let d = RunConfig::default();
        prop_assert_eq!(c.dense_k, cli.dense_k.or(env.dense_k).or(file.dense_k).unwrap_or(d.dense_k));
        prop_assert_eq!(c.seed, cli.seed.or(env.seed).or(file.seed).unwrap_or(d.seed));
        prop_assert_eq!(c.context_window, cli.context_window.or(env.context_window).or(file.context_window).unwrap_or(d.context_window));
        prop_assert_eq!(c.strategy, cli.strategy.or(env.strategy).or(file.strategy).unwrap_or(d.strategy));
        prop_assert_eq!(&c.llm_model, cli.llm_model.as_ref().or(env.llm_model.as_ref()).or(file.llm_model.as_ref()).unwrap_or(&d.llm_model));
        prop_assert_eq!(c.clamp_negative, cli.clamp_negative.or(env.clamp_negative).or(file.clamp_negative).unwrap_or(d.clamp_negative));
        prop_assert_eq!(c.max_retries, cli.max_retries.or(env.max_retries).or(file.max_retries).unwrap_or(d.max_retries));
        // untouched keys keep their defaults
        prop_assert_eq!(c.chunk_size, d.chunk_size);
        prop_assert_eq!(c.rerank_keep, d.rerank_keep);
    }

    #[test]
    fn env_and_file_layers_parse_back(p in layer()) {
        let vars = as_env(&p);
        let env = PartialConfig::from_env_with(|k| vars.iter().find(|(n, _)| n == k).map(|(_, v)| v.clone())).unwrap();
        prop_assert_eq!(&env, &p);
        let mut p2 = p.clone();
        p2.seed = p.seed.map(|x| x & (i64::MAX as u64));
        let file = PartialConfig::from_toml_str(&as_toml(&p)).unwrap();
        prop_assert_eq!(file, p2);
    }
}
