/* tslint:disable */
/* eslint-disable */

/**
 * Outcome of compressing and decoding one image.
 */
export class CodecResult {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Decoded image as RGBA, ready for `ImageData`.
     */
    decoded_rgba(): Uint8Array;
    readonly codewords: number;
    readonly compressed_bytes: number;
    readonly psnr: number;
    readonly raw_bytes: number;
}

export function codecRoundTrip(width: number, height: number, rgba: Uint8Array, codebook: number, seed: bigint): CodecResult;

/**
 * Seeded synthetic scene as RGBA.
 */
export function demoImage(width: number, height: number, seed: bigint): Uint8Array;

export function fftSpectrum(re: Float32Array, im: Float32Array, k: number): Float32Array;

export function inspectProgram(doc: string): string;

/**
 * Table II program from the fixtures, pretty-printed for editing.
 */
export function sampleProgram(): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_codecresult_free: (a: number, b: number) => void;
    readonly codecRoundTrip: (a: number, b: number, c: number, d: number, e: number, f: bigint) => [number, number, number];
    readonly codecresult_codewords: (a: number) => number;
    readonly codecresult_compressed_bytes: (a: number) => number;
    readonly codecresult_decoded_rgba: (a: number) => [number, number];
    readonly codecresult_psnr: (a: number) => number;
    readonly codecresult_raw_bytes: (a: number) => number;
    readonly demoImage: (a: number, b: number, c: bigint) => [number, number];
    readonly fftSpectrum: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly inspectProgram: (a: number, b: number) => [number, number, number, number];
    readonly sampleProgram: () => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
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
