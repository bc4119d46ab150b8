/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_codecresult_free: (a: number, b: number) => void;
export const codecRoundTrip: (a: number, b: number, c: number, d: number, e: number, f: bigint) => [number, number, number];
export const codecresult_codewords: (a: number) => number;
export const codecresult_compressed_bytes: (a: number) => number;
export const codecresult_decoded_rgba: (a: number) => [number, number];
export const codecresult_psnr: (a: number) => number;
export const codecresult_raw_bytes: (a: number) => number;
export const demoImage: (a: number, b: number, c: bigint) => [number, number];
export const fftSpectrum: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
export const inspectProgram: (a: number, b: number) => [number, number, number, number];
export const sampleProgram: () => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
