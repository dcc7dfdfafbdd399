import argparse
import logging
import os
import subprocess
import sys
from concurrent.futures import ThreadPoolExecutor

from dotenv import load_dotenv


def run_job(command, config_path, extra_args):
    """Runs one clinker subcommand with its config file. Returns the failure or None."""
    job = [sys.executable, "-m", "clinker", command, "--config", config_path] + list(extra_args)
    try:
        subprocess.run(job, check=True)
        logging.info(f"Executed {command} with {config_path} successfully.")
    except subprocess.CalledProcessError as e:
        logging.error(f"Error executing {command} with {config_path}: exit code {e.returncode}")
        return e


def execute_jobs_concurrently(command, config_paths, extra_args=(), workers=None):
    """Runs one job per config file on a thread pool; failures come back in submission order."""
    with ThreadPoolExecutor(max_workers=workers) as executor:
        futures = [executor.submit(run_job, command, path, extra_args) for path in config_paths]
        results = [future.result() for future in futures]
    return [(path, error) for path, error in zip(config_paths, results) if error is not None]


def main(argv=None):
    parser = argparse.ArgumentParser(description="Run one clinker subcommand over several config files concurrently.")
    parser.add_argument('command', help="clinker subcommand, e.g. mow or mesh.")
    parser.add_argument('configs', nargs='+', help="Config files, one job each.")
    parser.add_argument('--workers', type=int, default=None, help="Concurrent jobs (default: thread pool default).")
    parser.add_argument('--job_args', nargs='*', help="Extra arguments passed to each job.", default=[])
    args = parser.parse_args(argv)

    failures = execute_jobs_concurrently(args.command, args.configs, args.job_args, args.workers)
    for path, error in failures:
        logging.error(f"Job {args.command} {path} failed with exit code {error.returncode}")
    logging.info(f"{len(args.configs) - len(failures)} of {len(args.configs)} job(s) succeeded")
    return 1 if failures else 0


if __name__ == "__main__":
    log_dir = os.path.abspath(os.path.join(os.path.dirname(__file__), 'logs'))
    os.makedirs(log_dir, exist_ok=True)
    logging.basicConfig(
        level=logging.INFO,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[
            logging.FileHandler(os.path.join(log_dir, 'run_batch_jobs.log')),
            logging.StreamHandler()
        ]
    )
    load_dotenv(dotenv_path=os.path.join(os.path.dirname(__file__), '..', '.env'))
    sys.exit(main())
