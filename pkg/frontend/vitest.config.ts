import { defineConfig } from "vitest/config";

// the contract suite talks to a backend spawned on this origin; making it the
// document origin keeps happy-dom's same-origin fetch policy satisfied
export default defineConfig({
  test: {
    environment: "happy-dom",
    environmentOptions: {
      happyDOM: { url: "http://127.0.0.1:8923" },
    },
    testTimeout: 180_000,
    hookTimeout: 180_000,
  },
});
