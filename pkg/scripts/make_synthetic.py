#!/usr/bin/env python3
"""
Write a synthetic ISIC-layout dataset (images/, masks/, labels.csv)

Usage:
    python scripts/make_synthetic.py --out data/synthetic --n 100 --seed 42
"""
import sys
import os
import argparse
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from main import cmd_make_synthetic
from src.config import SEED


def parse_arguments():
    """Parse command line arguments"""
    parser = argparse.ArgumentParser(description='Generate synthetic dermoscopy-like cases with known truth')
    parser.add_argument('--out', required=True, help='Output directory')
    parser.add_argument('--n', type=int, default=100, help='Number of cases (default: 100)')
    parser.add_argument('--seed', type=int, default=SEED, help=f'Random seed (default: {SEED})')
    parser.add_argument('--size', type=int, default=128, help='Image side in pixels (default: 128)')
    return parser.parse_args()


if __name__ == '__main__':
    args = parse_arguments()
    paths = cmd_make_synthetic(args.out, args.n, args.seed, args.size)
    print("="*60)
    print(f"Synthetic dataset written ({args.n} cases):")
    for name, path in paths.items():
        print(f"  - {name}: {path}")
    print("="*60)
