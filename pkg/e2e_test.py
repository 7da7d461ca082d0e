#!/usr/bin/env python3
"""End-to-end test: run every clozecheck command on a tiny configuration."""

import json
import shutil
import subprocess
import sys
from pathlib import Path

import yaml


# ANSI colors
GREEN = "\033[32m"
RED = "\033[31m"
YELLOW = "\033[33m"
BLUE = "\033[36m"
RESET = "\033[0m"

RUN_ROOT = Path("/tmp/e2e_clozecheck")
RUN_DIR = RUN_ROOT / "run"
CONFIG_PATH = RUN_ROOT / "tiny.yaml"

TINY_CONFIG = {
    "seed": 7,
    "run_dir": str(RUN_DIR),
    "geometry": {"img_height": 16, "block_width": 4, "max_width": 64, "base_char_width": 8, "char_gap": 1},
    "model": {
        "conv_blocks": [1, 1],
        "channels": [8, 16],
        "hidden_size": 16,
        "embed_dim": 16,
        "dim": 16,
        "heads": 2,
        "ffn_dim": 32,
        "n_enc": 1,
        "n_fus": 2,
        "max_answer_len": 6,
    },
    "train": {"epochs_pretrain": 3, "epochs_mac": 3, "batch_size": 8, "lr_pretrain": 3e-3, "lr_mac": 1e-3},
    "data": {
        "vocab_size": 12,
        "min_answer_len": 1,
        "max_answer_len": 4,
        "shards": {
            "synthetic": {"count": 24},
            "handwriting": {"count": 16, "max_thickness": 1},
            "platform": {"count": 16, "error_ratio": 0.15},
        },
        "dev": {"count": 12, "error_ratio": 0.15},
        "test": {"count": 24, "error_ratio": 0.15},
    },
}


def print_section(title: str) -> None:
    """Print a section header."""
    print(f"\n{BLUE}{'=' * 70}{RESET}")
    print(f"{BLUE}{title:^70}{RESET}")
    print(f"{BLUE}{'=' * 70}{RESET}\n")


def print_test(description: str, passed: bool) -> None:
    """Print test result."""
    status = f"{GREEN}✓ PASS{RESET}" if passed else f"{RED}✗ FAIL{RESET}"
    print(f"{status} | {description}")


def clozecheck(*args: str) -> subprocess.CompletedProcess:
    return subprocess.run(
        ["uv", "run", "clozecheck", "-c", str(CONFIG_PATH), *args],
        capture_output=True,
        text=True,
        check=False,
    )


def setup_run() -> None:
    """Write the tiny configuration into a clean run root."""
    if RUN_ROOT.exists():
        shutil.rmtree(RUN_ROOT)
    RUN_ROOT.mkdir(parents=True)
    CONFIG_PATH.write_text(yaml.safe_dump(TINY_CONFIG))
    print(f"{GREEN}✓ Config written to {CONFIG_PATH}{RESET}")


def first_test_record() -> dict:
    return json.loads((RUN_DIR / "data" / "test.jsonl").read_text().splitlines()[0])


def run_checks() -> tuple[int, int]:
    """Run the commands in pipeline order and check their artifacts."""
    print_section("Running Pipeline Commands")
    passed = failed = 0

    def check(description: str, ok: bool, result: subprocess.CompletedProcess | None = None) -> None:
        nonlocal passed, failed
        print_test(description, ok)
        if ok:
            passed += 1
        else:
            failed += 1
            if result is not None:
                print(f"  {RED}{result.stderr.strip()[-500:]}{RESET}")

    result = clozecheck("gen-data")
    check("gen-data", result.returncode == 0 and (RUN_DIR / "data" / "train.jsonl").exists(), result)

    result = clozecheck("stats")
    check("stats", result.returncode == 0 and "platform" in result.stdout, result)

    result = clozecheck("pretrain")
    check("pretrain", result.returncode == 0 and (RUN_DIR / "ocr.ckpt").exists(), result)

    result = clozecheck("train")
    check("train (frozen backbone)", result.returncode == 0 and (RUN_DIR / "mac.ckpt").exists(), result)

    result = clozecheck("eval")
    report = RUN_DIR / "eval" / "report.json"
    systems = []
    if report.exists():
        systems = [r["system"] for r in json.loads(report.read_text())["reports"]]
    check("eval", result.returncode == 0 and systems == ["ocr-pipeline", "mac"], result)

    record = first_test_record() if (RUN_DIR / "data" / "test.jsonl").exists() else None
    if record is not None:
        image = RUN_DIR / "data" / record["image_path"]
        result = clozecheck("correct", "--image", str(image), "--answer", record["answer"])
        ok = result.returncode == 0
        if ok:
            output = json.loads(result.stdout)
            ok = len(output["labels"]) == len(record["answer"]) + 1
        check("correct", ok, result)

        result = clozecheck("viz-attn", "--sample", record["id"])
        csv_path = RUN_DIR / "attention" / record["id"] / "cross_attention.csv"
        check("viz-attn", result.returncode == 0 and csv_path.exists(), result)
    else:
        check("correct (no test manifest)", False)
        check("viz-attn (no test manifest)", False)

    result = clozecheck("--set", "model.n_fus=1", "train", "--no-pretrain", "--epochs", "1")
    check("train --no-pretrain", result.returncode == 0, result)

    result = clozecheck("ablate", "--no-grid", "--without", "handwriting")
    ablation = RUN_DIR / "ablations" / "report.json"
    check("ablate --without handwriting", result.returncode == 0 and ablation.exists(), result)

    result = clozecheck("--set", "model.bogus=1", "stats")
    check("invalid config exits with 1", result.returncode == 1, result)

    return passed, failed


def main() -> int:
    """Run end-to-end test."""
    print_section("clozecheck E2E Test - All Commands")

    try:
        print_section("Phase 1: Setup")
        setup_run()

        passed, failed = run_checks()

        print_section("Test Results")
        total = passed + failed
        print(f"Total: {total} tests")
        print(f"{GREEN}Passed: {passed}{RESET}")
        if failed > 0:
            print(f"{RED}Failed: {failed}{RESET}")
        else:
            print("Failed: 0")

        print(f"\n{BLUE}{'=' * 70}{RESET}")
        if failed == 0:
            print(f"{GREEN}{'✓ ALL ' + str(total) + ' TESTS PASSED':^70}{RESET}")
        else:
            print(f"{RED}{'✗ ' + str(failed) + ' / ' + str(total) + ' TESTS FAILED':^70}{RESET}")
        print(f"{BLUE}{'=' * 70}{RESET}\n")

        return 0 if failed == 0 else 1

    except Exception as e:
        print(f"\n{RED}✗ Test failed with exception: {e}{RESET}")
        import traceback

        traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())
