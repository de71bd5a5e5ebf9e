/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_annealdemo_free: (a: number, b: number) => void;
export const annealdemo_best_error: (a: number) => number;
export const annealdemo_demands: (a: number) => number;
export const annealdemo_error: (a: number) => number;
export const annealdemo_histogram: (a: number, b: number, c: number) => [number, number, number, number];
export const annealdemo_iteration: (a: number) => number;
export const annealdemo_new: (a: bigint, b: number, c: number, d: number) => [number, number, number];
export const annealdemo_step: (a: number, b: number) => [number, number, number];
export const annealdemo_target: (a: number, b: number, c: number) => [number, number, number, number];
export const annealdemo_temperature: (a: number) => number;
export const compare_with_planner: (a: bigint, b: number) => [number, number, number, number];
export const discretize_target: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
