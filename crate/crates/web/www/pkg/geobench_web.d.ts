/* tslint:disable */
/* eslint-disable */

/**
 * `points` evenly spaced samples of the GeoScore curve on `[0, max_km]`.
 */
export function geoscore_curve(max_km: number, points: number): string;

/**
 * Extracts the answer coordinate from free model text.
 */
export function parse_answer(text: string): string;

/**
 * Distance, GeoScore and boundary level of one guess.
 */
export function score_guess(truth_lat: number, truth_lon: number, guess_lat: number, guess_lon: number): string;

/**
 * Plays `rounds` rounds between two log-normal guessers with the given
 * median errors and returns the summary plus every round.
 */
export function simulate_duel(rounds: number, agent_median_km: number, opponent_median_km: number, sigma: number, seed: bigint): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly geoscore_curve: (a: number, b: number) => [number, number];
    readonly parse_answer: (a: number, b: number) => [number, number];
    readonly score_guess: (a: number, b: number, c: number, d: number) => [number, number];
    readonly simulate_duel: (a: number, b: number, c: number, d: number, e: bigint) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
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
