/* tslint:disable */
/* eslint-disable */

/**
 * Sensor acceleration (m/s², 2,048 Hz) after a half-sine hammer hit of
 * `amplitude` newtons, for scenario `id`.
 */
export function impulse_response(id: number, samples: number, amplitude: number): Float64Array;

/**
 * First `modes` natural frequencies (Hz) of the frame under scenario `id`.
 */
export function modal_frequencies(id: number, modes: number): Float64Array;

/**
 * JSON list of the 37 simulated damage scenarios.
 */
export function scenarios(): string;

/**
 * JSON layer table of SHMnet for `input_len` samples and `classes`
 * outputs, with the freeze pattern of `strategy` (off, s1, s2, s3).
 */
export function shmnet_table(input_len: number, classes: number, hidden: number, strategy: string): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly impulse_response: (a: number, b: number, c: number) => [number, number, number, number];
    readonly modal_frequencies: (a: number, b: number) => [number, number, number, number];
    readonly scenarios: () => [number, number];
    readonly shmnet_table: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
