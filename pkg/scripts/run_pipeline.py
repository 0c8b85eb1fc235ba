# scripts/run_pipeline.py
import os
import sys

from dotenv import load_dotenv

from misr.cli import main as misr_main

load_dotenv()

CONFIG = os.getenv("MISR_CONFIG")
STAGES = ("simulate", "split", "baseline", "train", "evaluate")


def main():
    extra = sys.argv[1:]
    if CONFIG:
        extra = ["--config", CONFIG, *extra]

    for stage in STAGES:
        print(f"▶️  misr {stage}")
        code = misr_main([stage, *extra])
        if code != 0:
            print(f"❌ {stage} exited with {code}")
            sys.exit(code)
        print(f"✅ {stage}")
    print("\n🎉 Done.")


if __name__ == "__main__":
    main()
