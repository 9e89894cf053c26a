//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every export takes plain numbers or strings and returns numbers, typed
//! arrays or JSON text, so the page needs no glue beyond the generated
//! module.

use serde::Serialize;
use tlshm::arch::{build_shmnet_with, count_params, freeze_for_strategy, ShmnetConfig, Strategy};
use tlshm::frame::{
    apply_damage, assemble_frame, downsample, modal_analysis, simulate_impulse, table3_scenarios, ImpulseRecord,
    SimulationConfig,
};
use tlshm::nn::LayerSpec;
use wasm_bindgen::prelude::*;

fn js_err(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

#[derive(Serialize)]
struct ScenarioRow {
    id: u32,
    description: String,
    multipliers: [f64; 6],
}

/// JSON list of the 37 simulated damage scenarios.
#[wasm_bindgen]
pub fn scenarios() -> String {
    let rows: Vec<ScenarioRow> = table3_scenarios()
        .into_iter()
        .map(|s| ScenarioRow { id: s.id, description: s.description, multipliers: s.multipliers })
        .collect();
    serde_json::to_string(&rows).expect("serializable")
}

/// First `modes` natural frequencies (Hz) of the frame under scenario `id`.
#[wasm_bindgen]
pub fn modal_frequencies(id: u32, modes: usize) -> Result<Vec<f64>, JsValue> {
    let sim = SimulationConfig::default();
    let scenario = table3_scenarios().into_iter().find(|s| s.id == id).ok_or_else(|| js_err(format!("no scenario {id}")))?;
    let springs = apply_damage(&sim.springs, &scenario).map_err(js_err)?;
    let sys = assemble_frame(&sim.frame, &springs).map_err(js_err)?;
    Ok(modal_analysis(&sys, modes).map_err(js_err)?.frequencies)
}

/// Sensor acceleration (m/s², 2,048 Hz) after a half-sine hammer hit of
/// `amplitude` newtons, for scenario `id`.
#[wasm_bindgen]
pub fn impulse_response(id: u32, samples: usize, amplitude: f64) -> Result<Vec<f64>, JsValue> {
    let sim = SimulationConfig::default();
    let scenario = table3_scenarios().into_iter().find(|s| s.id == id).ok_or_else(|| js_err(format!("no scenario {id}")))?;
    let springs = apply_damage(&sim.springs, &scenario).map_err(js_err)?;
    let sys = assemble_frame(&sim.frame, &springs).map_err(js_err)?;
    let (hammer, sensor) = (sys.hammer_dof.expect("portal frame"), sys.sensor_dof.expect("portal frame"));
    let hit = ImpulseRecord::half_sine(0, amplitude, sim.impulse_duration, hammer);
    let rec = simulate_impulse(&sys, &hit, sim.sample_rate, samples * sim.downsample, sensor).map_err(js_err)?;
    Ok(downsample(&rec, sim.downsample).map_err(js_err)?.values)
}

#[derive(Serialize)]
struct LayerRow {
    index: usize,
    layer: String,
    input: Vec<usize>,
    output: Vec<usize>,
    params: usize,
    frozen: bool,
}

#[derive(Serialize)]
struct NetworkTable {
    layers: Vec<LayerRow>,
    trainable: usize,
    frozen: usize,
    total: usize,
}

fn describe(layer: &LayerSpec) -> String {
    match *layer {
        LayerSpec::Conv1d { in_ch, out_ch, kernel, stride, .. } => format!("conv {in_ch}→{out_ch} k{kernel} s{stride}"),
        LayerSpec::MaxPool1d { kernel, stride } => format!("maxpool k{kernel} s{stride}"),
        LayerSpec::Dense { inputs, outputs } => format!("dense {inputs}→{outputs}"),
        LayerSpec::Dropout { p } => format!("dropout {p}"),
        LayerSpec::Relu => "relu".into(),
        LayerSpec::Flatten => "flatten".into(),
        LayerSpec::Residual { channels, kernel } => format!("residual {channels}ch k{kernel}"),
    }
}

/// JSON layer table of SHMnet for `input_len` samples and `classes`
/// outputs, with the freeze pattern of `strategy` (off, s1, s2, s3).
#[wasm_bindgen]
pub fn shmnet_table(input_len: usize, classes: usize, hidden: usize, strategy: &str) -> Result<String, JsValue> {
    let strategy: Strategy = strategy.parse().map_err(js_err)?;
    let base = ShmnetConfig::full(classes);
    let cfg = ShmnetConfig { input_len, head: tlshm::arch::HeadConfig { hidden, ..base.head }, ..base };
    let spec = build_shmnet_with(&cfg).map_err(js_err)?;
    let mask = freeze_for_strategy(&spec, strategy).map_err(js_err)?;
    let counts = count_params(&spec, Some(&mask)).map_err(js_err)?;
    let shapes = spec.shapes().map_err(js_err)?;
    let mut entry = 0;
    let layers = spec
        .layers
        .iter()
        .zip(shapes)
        .enumerate()
        .map(|(index, (layer, (input, output)))| {
            let groups = layer.param_shapes();
            let params = groups.iter().map(|(w, b)| w.iter().product::<usize>() + b).sum();
            let frozen = !groups.is_empty() && mask.frozen[entry];
            entry += groups.len();
            LayerRow { index, layer: describe(layer), input, output, params, frozen }
        })
        .collect();
    let table = NetworkTable { layers, trainable: counts.trainable, frozen: counts.frozen, total: counts.total };
    Ok(serde_json::to_string(&table).expect("serializable"))
}
