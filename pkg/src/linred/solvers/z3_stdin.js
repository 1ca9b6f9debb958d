#!/usr/bin/env node
// One-shot SMT-LIB2 solver: reads a complete script on stdin, evaluates it
// with the z3-solver WebAssembly build, and writes the solver output
// (sat/unsat/unknown plus any get-value responses) to stdout.
//
// Requires the "z3-solver" npm package to be resolvable (NODE_PATH is set
// by the caller when the package is installed globally).
'use strict';

const { init } = require('z3-solver');

async function readStdin() {
  const chunks = [];
  for await (const chunk of process.stdin) chunks.push(chunk);
  return Buffer.concat(chunks).toString('utf8');
}

(async () => {
  let code = 0;
  try {
    const script = await readStdin();
    const { Z3 } = await init();
    const ctx = Z3.mk_context(Z3.mk_config());
    const out = await Z3.eval_smtlib2_string(ctx, script);
    process.stdout.write(out);
  } catch (err) {
    process.stderr.write(String((err && err.stack) || err) + '\n');
    code = 1;
  }
  // The wasm build keeps worker threads alive; exit explicitly.
  process.exit(code);
})();
