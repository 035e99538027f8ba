#!/usr/bin/env python3
"""
Project setup script for the exposure-control benchmark
"""
import os
import sys
import subprocess
from pathlib import Path

sys.path.append(os.path.abspath(os.path.dirname(os.path.dirname(__file__))))


def check_python_version():
    """Check Python version"""
    if sys.version_info < (3, 9):
        print("❌ Python 3.9 or higher is required")
        sys.exit(1)
    print(f"✅ Python version: {sys.version.split()[0]}")


def install_dependencies():
    """Install Python dependencies"""
    try:
        subprocess.run([sys.executable, "-m", "pip", "install", "-r", "requirements.txt"],
                       check=True)
        print("✅ Dependencies installed successfully")
    except subprocess.CalledProcessError:
        print("❌ Failed to install dependencies")
        sys.exit(1)


def create_directories(output_dir: str):
    """Create the result tree the CLI writes into"""
    for sub in ("runs", "figures", "frames"):
        path = Path(output_dir) / sub
        path.mkdir(parents=True, exist_ok=True)
        print(f"✅ Created directory: {path}")


def check_experiment_configs():
    """Parse every bundled INI experiment so typos surface before a long run"""
    from config.experiment import load_experiment_config
    from src.exceptions import ConfigError

    configs = sorted(Path("config/experiments").glob("*.ini"))
    if not configs:
        print("⚠️  No experiment files found under config/experiments")
        return
    for path in configs:
        try:
            cfg = load_experiment_config(path)
            print(f"✅ {path}: {len(cfg.experiment.scenarios)} scenario(s), "
                  f"{len(cfg.experiment.controllers)} controller(s), {cfg.experiment.frames} frames")
        except ConfigError as e:
            print(f"❌ {path}: {e}")
            sys.exit(1)


def smoke_test():
    """One short noise-free run to prove the simulator, detector and controller fit together"""
    from src.camera.camera_sim import CameraModel
    from src.experiments.runner import RunSpec, simulate_run

    print("🔍 Running a 20-frame smoke test...")
    rec = simulate_run(RunSpec(scenario="normal", controller="aaec", seed=0, frames=20,
                               cam=CameraModel(width=320, height=240).noiseless))
    print(f"✅ Smoke test: {int(rec.found.sum())}/20 detections, final exposure {rec.dt[-1]:.3g} ms")


def main():
    """Main setup function"""
    from config.settings import get_settings
    settings = get_settings()

    print("🚀 Setting up aaec-bench...")
    print("=" * 50)

    check_python_version()

    print("\n📦 Installing dependencies...")
    if "--skip-install" in sys.argv:
        print("⏭️  Skipped")
    else:
        install_dependencies()

    print("\n📁 Creating directories...")
    create_directories(settings.output_dir)

    print("\n⚙️  Checking experiment files...")
    check_experiment_configs()

    print("\n🧪 Smoke test...")
    smoke_test()

    print("\n" + "=" * 50)
    print("✅ Setup completed successfully!")
    print("\n📋 Next steps:")
    print("1. python -m src.experiments run --config config/experiments/quick.ini")
    print("2. python -m src.experiments compare --config config/experiments/full.ini")
    print(f"3. python -m src.experiments plot {settings.output_dir}/runs --out {settings.output_dir}/figures")


if __name__ == "__main__":
    main()
