#!/usr/bin/env node
// Minimal SMT-LIB front end for the WASM build of z3.
// Usage: z3cli.js FILE.smt2   (prints sat / unsat / unknown)
const fs = require('fs');

async function main() {
  const path = process.argv[2];
  if (!path) {
    process.stderr.write('usage: z3cli.js FILE.smt2\n');
    process.exit(2);
  }
  const script = fs.readFileSync(path, 'utf8');
  const { init } = require('z3-solver');
  const { Z3 } = await init();
  const cfg = Z3.mk_config();
  const ctx = Z3.mk_context(cfg);
  const out = await Z3.eval_smtlib2_string(ctx, script);
  process.stdout.write(out.endsWith('\n') ? out : out + '\n');
  process.exit(0);
}

main().catch((e) => {
  process.stderr.write(String(e) + '\n');
  process.exit(1);
});
