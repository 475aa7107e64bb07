/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const geoscore_curve: (a: number, b: number) => [number, number];
export const parse_answer: (a: number, b: number) => [number, number];
export const score_guess: (a: number, b: number, c: number, d: number) => [number, number];
export const simulate_duel: (a: number, b: number, c: number, d: number, e: bigint) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
