"""Writes seeded synthetic micrographs with their label maps and a sample MoW config."""
import argparse
import logging
import os

from dotenv import load_dotenv

from clinker.clinker_output_files_utils import write_text_atomic
from clinker.raster.raster_load_images_features import save_image_png, save_label_map_png
from clinker.raster.raster_synthetic_microstructure import generate_synthetic_microstructure


def generate_fixtures(out_dir, count, width, height, seed, noise_sigma):
    written = []
    for index in range(count):
        image, labels = generate_synthetic_microstructure(width=width, height=height, seed=seed + index,
                                                          noise_sigma=noise_sigma)
        stem = os.path.join(out_dir, f"synthetic_{seed + index:03d}")
        written.append(save_image_png(image, f"{stem}.png"))
        written.append(save_label_map_png(labels, f"{stem}_labels.png"))
        config = (f"input={stem}.png\nlabels={stem}_labels.png\nout_dir={stem}_mow\n"
                  f"seed={seed + index}\nmow_p=3\nmow_window_count=10\nmow_window_side=50\n")
        written.append(write_text_atomic(f"{stem}_mow.env", config))
        logging.info(f"Generated synthetic micrograph {stem}.png")
    return written


if __name__ == "__main__":
    logging.basicConfig(
        level=logging.INFO,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[logging.StreamHandler()]
    )
    load_dotenv()

    parser = argparse.ArgumentParser(description="Generate synthetic clinker micrographs and label maps.")
    parser.add_argument('--out_dir', default=os.getenv('SYNTHETIC_FIXTURE_DIR', 'fixtures_out'))
    parser.add_argument('--count', type=int, default=1)
    parser.add_argument('--width', type=int, default=300)
    parser.add_argument('--height', type=int, default=300)
    parser.add_argument('--seed', type=int, default=0)
    parser.add_argument('--noise_sigma', type=float, default=8.0)
    args = parser.parse_args()

    generate_fixtures(args.out_dir, args.count, args.width, args.height, args.seed, args.noise_sigma)
