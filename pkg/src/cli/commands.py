"""
Command-line interface for DelayLab
"""
import argparse
import json
import logging
import math
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional, TextIO

import numpy as np

from config import Config
from errors import ConfigInvalid, DatasetFormatError, DomainError
from estimation.audit import METHODS, AuditGrid, audit_formulas, save_audit
from estimation.closed_form import balanced_closed_form, split_closed_form, wva_estimate
from estimation.fitting import FitOptions, ml_fit
from experiments.campaign import load_config, run_campaign, write_results
from experiments.reproductions import reproduce_scheme_comparison
from information.bounds import bias_factor, export_curves, photon_budget, spectrometer_bound, split_bound
from information.fisher import cramer_rao, fisher_spectrometer, fisher_split
from physics.dataset import DetectionDataset, DetectionMode
from physics.interferometer import ModelParams, sample_photons
from physics.spectrum import DEFAULT_N_SIGMA, Spectrum

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DOMAIN = 2


class UsageError(Exception):
    """Ошибка разбора аргументов командной строки"""


class _Parser(argparse.ArgumentParser):
    """argparse с кодом выхода 1 вместо 2 для ошибок использования"""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _float_list(text: str) -> List[float]:
    try:
        return [float(item) for item in text.split(',') if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'")


def _photon_count(text: str) -> int:
    value = float(text)
    if value < 0 or not value.is_integer():
        raise argparse.ArgumentTypeError(f"photon count must be a non-negative integer, got '{text}'")
    return int(value)


def _add_spectrum_flags(parser: argparse.ArgumentParser):
    group = parser.add_argument_group("spectrum")
    group.add_argument("--center", type=float, default=2.0e15,
                       help="nominal spectrum center w0 [rad/s] (default: 2e15)")
    group.add_argument("--dw", type=float, default=1.0e15,
                       help="nominal spectrum spread dw [rad/s] (default: 1e15)")
    group.add_argument("--n-sigma", type=float, default=DEFAULT_N_SIGMA,
                       help="truncation half-width [units of dw] (default: 6)")
    group.add_argument("--spectrum-file", type=Path, default=None,
                       help="tabulated spectrum: two columns w [rad/s], density [s/rad]; overrides --center/--dw")


def _add_model_flags(parser: argparse.ArgumentParser, phi_default: Optional[float] = None):
    parser.add_argument("--tau", type=float, default=0.0, help="time delay tau [s] (default: 0)")
    parser.add_argument("--phi", type=float, default=phi_default, required=phi_default is None,
                        help="alignment phase phi [rad]")
    parser.add_argument("--phi-reference", choices=("absolute", "carrier"), default="absolute",
                        help="--phi is absolute or relative to the carrier, phi_c = phi - w0*tau [-]")
    parser.add_argument("--eps", type=float, default=0.0, help="alignment fluctuation amplitude eps [rad]")
    parser.add_argument("--omega-noise", type=float, default=0.0,
                        help="split-detector readout noise Omega [rad/s]")


def _spectrum(args) -> Spectrum:
    if args.spectrum_file is not None:
        return Spectrum.from_file(args.spectrum_file)
    return Spectrum.gaussian(args.center, args.dw, n_sigma=args.n_sigma)


def _model(args, spectrum: Spectrum) -> ModelParams:
    phi = args.phi + spectrum.center * args.tau if args.phi_reference == "carrier" else args.phi
    return ModelParams(tau=args.tau, phi=phi, spectrum=spectrum, epsilon=args.eps, omega_noise=args.omega_noise)


class DelayLabCli:
    """Диспетчер подкоманд DelayLab"""

    def __init__(self, stdout: TextIO = None, stderr: TextIO = None):
        """
        Инициализация CLI

        Args:
            stdout: Поток для JSON-документов
            stderr: Поток для сообщений об ошибках
        """
        self.stdout = stdout or sys.stdout
        self.stderr = stderr or sys.stderr
        self.handlers: Dict[str, Callable] = {}
        self.parser = _Parser(prog="delaylab", description="Joint weak measurement of ultrasmall time delays")
        self.subparsers = self.parser.add_subparsers(dest="command", metavar="COMMAND")
        self.subparsers.required = True
        self._setup_handlers()

    def _add_command(self, name: str, handler: Callable, help_text: str) -> argparse.ArgumentParser:
        self.handlers[name] = handler
        return self.subparsers.add_parser(name, help=help_text, description=help_text)

    def _setup_handlers(self):
        """Регистрация подкоманд"""
        # sample: генерация синтетического набора данных
        parser = self._add_command("sample", self.sample_command, "simulate photons and write a dataset")
        _add_spectrum_flags(parser)
        _add_model_flags(parser)
        parser.add_argument("--mode", choices=[m.value for m in DetectionMode], default="spectrometer",
                            help="detection mode [-]")
        parser.add_argument("--n", type=_photon_count, required=True, help="photon count N [photons]")
        parser.add_argument("--seed", type=int, required=True, help="master seed [-]")
        parser.add_argument("--fluctuation", choices=("photon", "pulse"), default="photon",
                            help="one phi' draw per photon or per pulse [-]")
        parser.add_argument("--photons-per-pulse", type=int, default=1, help="photons per pulse [photons]")
        parser.add_argument("--smear", action="store_true",
                            help="add readout noise Omega to spectrometer frequencies [-]")
        parser.add_argument("--out", type=Path, default=Path(Config.RESULTS_DIR) / "dataset.csv",
                            help="dataset CSV path; the JSON sidecar is written next to it [path]")

        # estimate: оценка (τ, φ) по набору данных
        parser = self._add_command("estimate", self.estimate_command, "estimate (tau, phi) from a dataset")
        parser.add_argument("--data", type=Path, required=True, help="dataset CSV with its JSON sidecar [path]")
        parser.add_argument("--method", choices=("ml", "balanced", "split", "wva"), default="ml",
                            help="estimator [-]")
        parser.add_argument("--eps", type=float, default=0.0, help="assumed fluctuation amplitude eps [rad]")
        parser.add_argument("--omega-noise", type=float, default=0.0, help="assumed readout noise Omega [rad/s]")
        parser.add_argument("--alpha", type=float, default=None,
                            help="WVA detuning alpha = phi - w0*tau [rad] (required for --method wva)")
        parser.add_argument("--likelihood", choices=("records", "histogram"), default="records",
                            help="ML on raw records or on a frequency histogram [-]")
        parser.add_argument("--bin-width", type=float, default=None,
                            help="histogram bin width [rad/s] (default: dw/100)")
        parser.add_argument("--split-model", choices=("exact", "second_order"), default="exact",
                            help="split-detector cell model used by ML [-]")
        parser.add_argument("--phase-hint", type=float, default=math.pi / 2,
                            help="carrier phase selecting the (tau, phi) branch [rad] (default: pi/2)")
        parser.add_argument("--out", type=Path, default=None, help="also write the estimate JSON here [path]")

        # fisher: информация Фишера и границы Крамера–Рао
        parser = self._add_command("fisher", self.fisher_command, "Fisher information and Cramer-Rao bounds")
        _add_spectrum_flags(parser)
        _add_model_flags(parser, phi_default=math.pi / 2)
        parser.add_argument("--mode", choices=[m.value for m in DetectionMode], default="spectrometer",
                            help="detection mode [-]")
        parser.add_argument("--model", choices=("exact", "second_order"), default="exact",
                            help="split-detector cell model [-]")
        parser.add_argument("--derivatives", choices=("analytic", "fd"), default="analytic",
                            help="split-detector derivatives: analytic or central differences [-]")
        parser.add_argument("--frame", choices=("absolute", "carrier"), default="absolute",
                            help="phase coordinate of the reported matrix [-]")
        parser.add_argument("--n", type=float, default=None, help="photon count N for CR bounds [photons]")

        # bounds: аналитические границы
        parser = self._add_command("bounds", self.bounds_command, "closed-form precision bounds")
        parser.add_argument("--dw", type=float, required=True, help="spectrum spread dw [rad/s]")
        parser.add_argument("--eps", type=float, default=0.0, help="fluctuation amplitude eps [rad]")
        parser.add_argument("--omega-noise", type=float, default=0.0, help="readout noise Omega [rad/s]")
        parser.add_argument("--phi", type=float, default=math.pi / 2,
                            help="carrier-referenced alignment phi_c [rad] (default: pi/2)")
        parser.add_argument("--n", type=float, required=True, help="photon count N [photons]")
        parser.add_argument("--tau", type=float, default=None,
                            help="delay for the photon budget 10/(dw*tau)^2 [s]")

        # curves: кривые предельной точности
        parser = self._add_command("curves", self.curves_command, "ultimate-precision curves of three schemes")
        parser.add_argument("--eps", type=float, default=0.02, help="fluctuation amplitude eps [rad]")
        parser.add_argument("--c", type=float, default=0.25e-18, help="WVA constant C [s]")
        parser.add_argument("--omega-ref", type=float, default=2.0e15, help="reference frequency w [rad/s]")
        parser.add_argument("--tau-min", type=float, default=1e-20, help="smallest delay [s]")
        parser.add_argument("--tau-max", type=float, default=1e-15, help="largest delay [s]")
        parser.add_argument("--points", type=int, default=101, help="grid points [-]")
        parser.add_argument("--linear", action="store_true", help="linear instead of logarithmic grid [-]")
        parser.add_argument("--gnuplot", action="store_true", help="gnuplot blocks instead of CSV [-]")
        parser.add_argument("--out", type=Path, default=Path(Config.RESULTS_DIR) / "curves.csv",
                            help="output file [path]")

        # audit: сверка аналитических оценщиков с ML
        parser = self._add_command("audit", self.audit_command, "audit closed-form estimators against numeric ML")
        _add_spectrum_flags(parser)
        parser.add_argument("--thetas", type=_float_list, default=[1e-3, 3e-3, 1e-2, 3e-2],
                            help="dimensionless delays theta = dw*tau, comma-separated [-]")
        parser.add_argument("--phis", type=_float_list, default=[math.pi / 2],
                            help="carrier-referenced phases phi_c, comma-separated [rad]")
        parser.add_argument("--eps", type=_float_list, default=[0.0],
                            help="fluctuation amplitudes eps, comma-separated [rad]")
        parser.add_argument("--omega-ratios", type=_float_list, default=[0.0],
                            help="readout noise Omega/dw, comma-separated [-]")
        parser.add_argument("--methods", default=",".join(METHODS),
                            help=f"closed forms to audit, comma-separated, from {','.join(METHODS)} [-]")
        parser.add_argument("--n", type=_photon_count, default=None,
                            help="sampled input with N photons per point; omitted: exact model law [photons]")
        parser.add_argument("--seed", type=int, default=None, help="master seed, required with --n [-]")
        parser.add_argument("--out", type=Path, default=Path(Config.RESULTS_DIR) / "audit.json",
                            help="audit report JSON [path]")
        parser.add_argument("--csv", type=Path, default=None, help="audit records CSV [path]")

        # campaign: кампания Монте-Карло
        parser = self._add_command("campaign", self.campaign_command, "run a Monte Carlo campaign")
        parser.add_argument("--config", type=Path, required=True, help="campaign config, TOML or JSON [path]")
        parser.add_argument("--workers", type=int, default=None, help="worker processes [-]")
        parser.add_argument("--out", type=Path, default=None, help="override output CSV [path]")
        parser.add_argument("--archive", action="store_true", help="store the run in the results database [-]")
        parser.add_argument("--db", default=None, help="SQLAlchemy database URL for --archive [url]")

    # ----------------------------------------------------------- обработчики

    def _emit(self, payload):
        self.stdout.write(json.dumps(payload) + '\n')
        self.stdout.flush()

    def sample_command(self, args) -> int:
        """Генерация набора данных"""
        spectrum = _spectrum(args)
        m = _model(args, spectrum)
        dataset = sample_photons(m, args.mode, args.n, args.seed, smear_spectrometer=args.smear,
                                 fluctuation=args.fluctuation, photons_per_pulse=args.photons_per_pulse)
        csv_path, json_path = dataset.save(args.out)
        self._emit({"csv": str(csv_path), "json": str(json_path), "mode": dataset.mode.value,
                    "n_photons": dataset.n_photons, "seed": args.seed})
        return EXIT_OK

    def estimate_command(self, args) -> int:
        """Оценка по набору данных"""
        dataset = DetectionDataset.load(args.data)
        if args.method == "ml":
            options = FitOptions(likelihood=args.likelihood, bin_width=args.bin_width,
                                 split_model=args.split_model, assumed_omega_noise=args.omega_noise,
                                 phase_hint=args.phase_hint)
            estimate = ml_fit(dataset, args.eps, options)
        elif args.method == "balanced":
            estimate = balanced_closed_form(dataset, args.eps)
        elif args.method == "split":
            estimate = split_closed_form(dataset, args.eps, args.omega_noise)
        else:
            if args.alpha is None:
                raise UsageError("estimate: --alpha is required for --method wva")
            estimate = wva_estimate(dataset, args.alpha)

        document = estimate.to_json()
        if args.out is not None:
            args.out.parent.mkdir(parents=True, exist_ok=True)
            args.out.write_text(document + '\n', encoding='utf-8')
        self.stdout.write(document + '\n')
        return EXIT_OK

    def fisher_command(self, args) -> int:
        """Матрица Фишера"""
        spectrum = _spectrum(args)
        m = _model(args, spectrum)
        if args.mode == DetectionMode.SPLIT.value:
            info = fisher_split(m, args.model, args.derivatives)
        else:
            info = fisher_spectrometer(m)
        shown = info.carrier_frame() if args.frame == "carrier" else info
        payload = {"mode": args.mode, "fisher": shown.to_dict(), "eigenvalues": shown.eigenvalues().tolist()}
        if args.n is not None:
            delta_tau, delta_phi = cramer_rao(info, args.n)
            payload["cramer_rao"] = {"n_photons": args.n, "delta_tau": delta_tau, "delta_phi": delta_phi}
        self._emit(payload)
        return EXIT_OK

    def bounds_command(self, args) -> int:
        """Аналитические границы"""
        payload = {
            "spectrometer_bound": spectrometer_bound(args.dw, args.eps, args.n),
            "split_bound": split_bound(args.dw, args.eps, args.omega_noise, args.phi, args.n),
            "bias_factor": bias_factor(args.eps, args.phi, args.omega_noise / args.dw),
            "n_photons": args.n,
        }
        if args.tau is not None:
            payload["photon_budget"] = photon_budget(args.dw, args.tau)
        self._emit(payload)
        return EXIT_OK

    def curves_command(self, args) -> int:
        """Кривые предельной точности"""
        if args.points < 2 or not 0 < args.tau_min < args.tau_max:
            raise UsageError("curves: need --points >= 2 and 0 < --tau-min < --tau-max")
        if args.linear:
            grid = np.linspace(args.tau_min, args.tau_max, args.points)
        else:
            grid = np.geomspace(args.tau_min, args.tau_max, args.points)
        comparison = reproduce_scheme_comparison(args.eps, args.c, args.omega_ref, grid)
        path = export_curves(comparison.curves(), args.out, gnuplot=args.gnuplot)
        below = [t for t, flag in zip(comparison.tau, comparison.joint_below_wva) if flag]
        self._emit({"path": str(path), "crossover": comparison.crossover,
                    "standard_level": comparison.standard[0], "wva_level": comparison.wva[0],
                    "joint_below_wva_max_tau": max(below) if below else None})
        return EXIT_OK

    def audit_command(self, args) -> int:
        """Аудит аналитических оценщиков"""
        if args.n is not None and args.seed is None:
            raise UsageError("audit: --seed is required with --n")
        methods = [m.strip() for m in args.methods.split(',') if m.strip()]
        unknown = [m for m in methods if m not in METHODS]
        if unknown:
            raise UsageError(f"audit: unknown methods {unknown}")
        grid = AuditGrid(thetas=args.thetas, phis=args.phis, epsilons=args.eps, omega_ratios=args.omega_ratios,
                         n_photons=args.n, seed=args.seed or 0, methods=methods)
        report = audit_formulas(grid, _spectrum(args))
        written = save_audit(report, args.out, args.csv)
        self._emit({"files": {k: str(v) for k, v in written.items()},
                    "input_kind": report.input_kind,
                    "summary": [s.model_dump() for s in report.summary],
                    "failures": report.failures()})
        return EXIT_OK

    def campaign_command(self, args) -> int:
        """Кампания Монте-Карло"""
        config = load_config(args.config)
        results = run_campaign(config, workers=args.workers)
        csv_path = write_results(results, args.out or config.output.csv, config.output.json_path)
        payload = {"csv": str(csv_path), "cells": len(results),
                   "failures": sum(r.failures for r in results), "run_id": None}
        if args.archive:
            from db.database import DatabaseManager
            from db.repository import CampaignRepository

            manager = DatabaseManager(args.db or Config.DATABASE_URL)
            session = manager.get_session_sync()
            try:
                run = CampaignRepository(session).save_run(config, results)
                payload["run_id"] = run.id
            finally:
                session.close()
        self._emit(payload)
        return EXIT_OK

    # -------------------------------------------------------------- диспетчер

    def dispatch(self, argv: Optional[List[str]] = None) -> int:
        """
        Разбор аргументов и выполнение подкоманды

        Args:
            argv: Аргументы без имени программы

        Returns:
            int: 0 - успех, 1 - ошибка использования, 2 - доменная ошибка
        """
        try:
            args = self.parser.parse_args(argv)
            logger.info(f"Command: {args.command}")
            return self.handlers[args.command](args)
        except SystemExit as e:
            # --help
            return int(e.code or 0)
        except DomainError as e:
            logger.error(f"{type(e).__name__}: {e}")
            self.stderr.write(f"{type(e).__name__}: {e}\n")
            return EXIT_DOMAIN
        except (UsageError, ConfigInvalid, DatasetFormatError, FileNotFoundError, ValueError) as e:
            logger.error(f"{type(e).__name__}: {e}")
            self.stderr.write(f"{type(e).__name__}: {e}\n")
            return EXIT_USAGE


def main(argv: Optional[List[str]] = None) -> int:
    """Точка входа CLI"""
    return DelayLabCli().dispatch(argv)
