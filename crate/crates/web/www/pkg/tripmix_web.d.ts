/* tslint:disable */
/* eslint-disable */

/**
 * Annealing over one synthetic test day, with targets and history taken
 * from the previous day.
 */
export class AnnealDemo {
    free(): void;
    [Symbol.dispose](): void;
    best_error(): number;
    demands(): number;
    error(): number;
    /**
     * Current bin masses of one characteristic.
     */
    histogram(tag: string): Float64Array;
    iteration(): number;
    constructor(seed: bigint, trips: number, l0: number, decay: number);
    /**
     * Runs `n` proposals and returns how many were accepted.
     */
    step(n: number): number;
    target(tag: string): Float64Array;
    temperature(): number;
}

/**
 * Observed trips of a synthetic day against the planner's rank-1 route for
 * the same demands, as CSV:
 * `characteristic, lo, hi, observed, planner` followed by a blank line and
 * `characteristic, observed_mean, planner_mean, l1`.
 */
export function compare_with_planner(seed: bigint, trips: number): string;

/**
 * Bin masses of a parametric target on `[lo, hi)` split into `bins`.
 * `kind` is `beta` (a, b), `poisson` (a = rate over the bin index) or
 * `gaussian` (a = mean, b = standard deviation).
 */
export function discretize_target(kind: string, a: number, b: number, lo: number, hi: number, bins: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_annealdemo_free: (a: number, b: number) => void;
    readonly annealdemo_best_error: (a: number) => number;
    readonly annealdemo_demands: (a: number) => number;
    readonly annealdemo_error: (a: number) => number;
    readonly annealdemo_histogram: (a: number, b: number, c: number) => [number, number, number, number];
    readonly annealdemo_iteration: (a: number) => number;
    readonly annealdemo_new: (a: bigint, b: number, c: number, d: number) => [number, number, number];
    readonly annealdemo_step: (a: number, b: number) => [number, number, number];
    readonly annealdemo_target: (a: number, b: number, c: number) => [number, number, number, number];
    readonly annealdemo_temperature: (a: number) => number;
    readonly compare_with_planner: (a: bigint, b: number) => [number, number, number, number];
    readonly discretize_target: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
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
