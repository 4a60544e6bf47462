/* tslint:disable */
/* eslint-disable */

/**
 * Enriches the demo fit sequentially with costs `[1, cost_ratio]` until
 * `budget` is spent. `policy` is `free` or `hf_only`.
 */
export function adaptive_demo(config_json: string, budget: number, cost_ratio: number, policy: string, seed: bigint): string;

/**
 * Fits the ensemble to the configured Forrester points and returns the
 * grid predictions, per-kernel means and weights.
 */
export function forrester_demo(config_json: string): string;

/**
 * Correlation against distance for every kernel at one lengthscale,
 * sampled on `points` distances in `[0, 3 * lengthscale]`.
 */
export function kernel_profiles(lengthscale: number, points: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly adaptive_demo: (a: number, b: number, c: number, d: number, e: number, f: number, g: bigint) => [number, number, number, number];
    readonly forrester_demo: (a: number, b: number) => [number, number, number, number];
    readonly kernel_profiles: (a: number, b: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
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
