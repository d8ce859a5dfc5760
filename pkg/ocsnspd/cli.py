"""Command line frontend: figure recipes and design workflows that write CSV, optional SVG, and manifests.

Exit codes are 0 on success, 2 for usage errors and 1 for any other library error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import beamtrain, designopt, detector, system, thinfilm
from .errors import OCSNSPDException, UsageError
from .ext.manifest import OutputWriter
from .materials import MaterialLibrary
from .results import SweepResult

logger = logging.getLogger(__name__)

DATA_DIR = Path(__file__).parent / 'data'
DESIGNS_DIR = DATA_DIR / 'designs'
FIGURES = ('fig2', 'fig3a', 'fig3b', 'fig4', 'thin-substrate')
# half side of the 15 um square active area
MEANDER_HALF_SIDE = 7.5e-6

def _plot(args, writer: OutputWriter, name: str, series, xlabel: str, ylabel: str, **kwargs):
    if args.format in ('svg', 'both'):
        from .ext.plotting import render_svg
        writer.write_bytes(name, render_svg(series, xlabel, ylabel, **kwargs))

def _csv(args, writer: OutputWriter, name: str, result: SweepResult):
    if args.format in ('csv', 'both'):
        writer.write_csv(name, result)

def cmd_stack_spectrum(args, library: MaterialLibrary, writer: OutputWriter) -> int:
    if args.step_nm <= 0 or args.stop_nm < args.start_nm:
        raise UsageError(f'empty wavelength range {args.start_nm}-{args.stop_nm} nm with step {args.step_nm} nm')
    count = int(np.floor((args.stop_nm - args.start_nm) / args.step_nm + 1e-9)) + 1
    wavelengths = [(args.start_nm + i * args.step_nm) * 1e-9 for i in range(count)]

    stack = thinfilm.LayerStack.from_json(args.stack)
    result = thinfilm.absorptance_spectrum(stack, wavelengths, np.radians(args.angle_deg), args.polarization, library)
    _csv(args, writer, 'stack_spectrum.csv', result)
    _plot(args, writer, 'stack_spectrum.svg', [('R', result, 'wavelength_nm', 'R'), ('A meander', result, 'wavelength_nm', 'A_nbn'),
                                               ('A Au', result, 'wavelength_nm', 'A_au')], 'wavelength (nm)', 'fraction')
    print(result.to_text(), end='')
    return 0

def cmd_beam_profile(args, library: MaterialLibrary, writer: OutputWriter) -> int:
    train = beamtrain.BeamTrain.from_json(args.train, library)
    profile = beamtrain.propagate(train, args.step_um * 1e-6, library)
    result = profile.to_sweep()
    _csv(args, writer, 'beam_profile.csv', result)
    _plot(args, writer, 'beam_profile.svg', [('w', result, 'z_um', 'w_um')], 'z (um)', 'spot radius w (um)')
    final = profile.final
    print(f'spot radius on target: {final.spot_radius * 1e6:.4f} um (2w = {2 * final.spot_radius * 1e6:.4f} um)')
    return 0

def cmd_coupling(args, library: MaterialLibrary, writer: OutputWriter) -> int:
    w = args.w_um * 1e-6
    half = args.side_um * 1e-6 / 2
    offsets = (args.offset_x_um * 1e-6, args.offset_y_um * 1e-6)
    value = beamtrain.square_aperture_coupling(w, half, *offsets)
    result = SweepResult(['w_um', 'side_um', 'coupling'])
    result.append((args.w_um, args.side_um, value))
    if args.monte_carlo:
        from .ext.oracles import monte_carlo_coupling
        estimate, error = monte_carlo_coupling(w, half, *offsets, samples=args.monte_carlo, seed=args.seed)
        result = SweepResult(['w_um', 'side_um', 'coupling', 'monte_carlo', 'monte_carlo_se'])
        result.append((args.w_um, args.side_um, value, estimate, error))
    _csv(args, writer, 'coupling.csv', result)
    print(f'{value:.6f}')
    return 0

def _observations(args) -> list:
    if args.observations:
        return detector.observations_from_csv(args.observations)
    return detector.bundled_observations(args.calibration)

def cmd_fit(args, library: MaterialLibrary, writer: OutputWriter) -> int:
    model, report = detector.fit_channel(_observations(args), amplitude=args.amplitude, channel_id=args.channel_id)
    writer.write_text('channel_model.json', json.dumps(model.to_dict(), indent=2, sort_keys=True) + '\n')
    residuals = SweepResult(['bias_norm', 'wavelength_nm', 'is_dcr', 'relative_residual'])
    for entry in report.residuals:
        residuals.append((entry['bias'], entry['wavelength_nm'], entry['kind'] == 'dcr', entry['residual']))
    _csv(args, writer, 'fit_residuals.csv', residuals)
    print(json.dumps(report.parameters, indent=2, sort_keys=True))
    print(f'residual norm {report.residual_norm:.6g} (initial {report.initial_residual_norm:.6g})')
    return 0

def cmd_curve(args, library: MaterialLibrary, writer: OutputWriter) -> int:
    model = detector.DetectorChannelModel.from_json(args.model)
    curve = detector.de_vs_dcr_curve(model, args.wavelength_nm * 1e-9)
    _csv(args, writer, 'de_dcr_curve.csv', curve)
    _plot(args, writer, 'de_dcr_curve.svg', [(model.channel_id, curve, 'dcr_hz', 'de')], 'DCR (Hz)', 'system DE', logx=True)
    try:
        print(f'DE at 100 Hz: {detector.de_at_dcr(curve, 100.0):.4f}')
    except OCSNSPDException as e:
        print(f'DE at 100 Hz: unavailable ({e})')
    return 0

def cmd_channels(args, library: MaterialLibrary, writer: OutputWriter) -> int:
    config = system.SystemConfig.from_json(args.system)
    report = system.channel_report(config, args.wavelength_nm * 1e-9)
    writer.write_text('channels.csv', report.to_csv_text())
    print(report.to_text(), end='')
    return 0

def cmd_optimize_cavity(args, library: MaterialLibrary, writer: OutputWriter) -> int:
    stack = thinfilm.LayerStack.from_json(args.stack)
    second = None
    if args.vary_au:
        gold = [i for i, layer in enumerate(stack.layers) if layer.material_id == 'Au']
        if not gold:
            raise UsageError('--vary-au needs an Au layer in the stack')
        second = gold[0]
    problem = designopt.CavityDesignProblem(stack, second_layer=second, band=(args.band_nm[0] * 1e-9, args.band_nm[1] * 1e-9),
                                            points=args.points, library=library)
    result = designopt.optimize_cavity(problem)
    _csv(args, writer, 'cavity_scan.csv', result.curve)
    _plot(args, writer, 'cavity_scan.svg', [('band mean', result.curve, 'thickness_nm', 'mean_A_nbn')],
          'SiO thickness (nm)', 'band-averaged meander absorptance')
    writer.write_text('cavity_stack.json', json.dumps(result.stack.to_dict(), indent=2) + '\n')
    print(result.summary(), end='')
    return 0

def _lens_problem(args, library: MaterialLibrary) -> designopt.LensDesignProblem:
    problem = designopt.LensDesignProblem.from_json(args.problem) if args.problem else designopt.LensDesignProblem()
    fields = {name: getattr(problem, name) for name in problem.__dataclass_fields__}
    fields.update(library=library, seed=args.seed)
    if args.substrate_um is not None:
        fields['substrate_thickness'] = args.substrate_um * 1e-6
    if args.starts is not None:
        fields['starts'] = args.starts
    return designopt.LensDesignProblem(**fields)

def _write_lens(args, writer: OutputWriter, result: designopt.LensDesignResult, prefix: str):
    _csv(args, writer, f'{prefix}.csv', result.to_sweep())
    writer.write_text(f'{prefix}_train.json', json.dumps(result.train.to_dict(), indent=2) + '\n')
    writer.write_text(f'{prefix}_summary.txt', result.summary())

def cmd_optimize_lens(args, library: MaterialLibrary, writer: OutputWriter) -> int:
    problem = _lens_problem(args, library)
    if args.catalog:
        result = designopt.optimize_lens_catalog(problem, designopt.read_lens_catalog(args.catalog))
    else:
        result = designopt.optimize_lens_train(problem, workers=args.workers)
    _write_lens(args, writer, result, 'lens_design')
    print(result.summary(), end='')
    return 0

def cmd_qkd(args, library: MaterialLibrary, writer: OutputWriter) -> int:
    config = system.SystemConfig.from_json(args.system)
    link = system.LinkParams(args.mu, args.loss_db, args.internal_loss_db, args.pulse_rate, args.gate_fraction,
                             args.e_det, args.wavelength_nm * 1e-9, args.bias, args.target_dcr)
    losses = [args.loss_db]
    if args.loss_sweep:
        start, stop, step = args.loss_sweep
        if step <= 0 or stop < start:
            raise UsageError('loss sweep needs start <= stop and a positive step')
        losses = list(np.arange(start, stop + step / 2, step))

    result = SweepResult(['loss_db', 'sifted_hz', 'qber'])
    for loss in losses:
        budget = system.bb84_budget(config, link.with_loss(float(loss)))
        result.append((loss, budget.sifted_rate, budget.qber))
    _csv(args, writer, 'qkd.csv', result)
    _plot(args, writer, 'qkd.svg', [('sifted', result, 'loss_db', 'sifted_hz')], 'channel loss (dB)', 'sifted rate (Hz)', logy=True)
    print(result.to_text(), end='')
    return 0

def _fitted_curve(name: str, wavelength: float) -> tuple[detector.DetectorChannelModel, SweepResult]:
    model, _ = detector.fit_channel(detector.bundled_observations(name), channel_id=name)
    return model, detector.de_vs_dcr_curve(model, wavelength)

def _reproduce_fig2(args, library, writer):
    summary = SweepResult(['with_lens', 'de_at_100hz'])
    series = []
    for name, flag in (('fig2_lens', 1), ('fig2_no_lens', 0)):
        _, curve = _fitted_curve(name, 1550e-9)
        _csv(args, writer, f'{name}.csv', curve)
        summary.append((flag, detector.de_at_dcr(curve, 100.0)))
        series.append((name, curve, 'dcr_hz', 'de'))
    _csv(args, writer, 'fig2_summary.csv', summary)
    _plot(args, writer, 'fig2.svg', series, 'DCR (Hz)', 'system DE', logx=True)
    print(summary.to_text(), end='')

    if args.with_optics:
        bare = beamtrain.spot_at_target(beamtrain.BeamTrain.from_json(DESIGNS_DIR / 'bare_fiber_train.json', library), library)
        problem = designopt.LensDesignProblem(library=library, seed=args.seed)
        focused = designopt.optimize_lens_train(problem, workers=args.workers).spot_diameter / 2
        optics = SweepResult(['with_lens', 'spot_radius_um', 'coupling'])
        for flag, radius in ((0, bare), (1, focused)):
            optics.append((flag, radius * 1e6, beamtrain.square_aperture_coupling(radius, MEANDER_HALF_SIDE)))
        _csv(args, writer, 'fig2_optics.csv', optics)
        print(optics.to_text(), end='')

def _reproduce_fig3(args, library, writer, dark: bool):
    model, _ = detector.fit_channel(detector.bundled_observations('fig3_best_channel'), channel_id='best')
    grid = detector.DEFAULT_BIAS_GRID
    if dark:
        result = SweepResult(['bias_norm', 'dcr_hz'])
        result.extend((bias, detector.dark_rate(model, bias)) for bias in grid)
        _csv(args, writer, 'fig3b.csv', result)
        _plot(args, writer, 'fig3b.svg', [('DCR', result, 'bias_norm', 'dcr_hz')], 'Ib/Ic', 'DCR (Hz)', logy=True)
    else:
        result = SweepResult(['bias_norm', 'de_1550', 'de_1310'])
        result.extend((bias, detector.system_de(model, 1550e-9, bias), detector.system_de(model, 1310e-9, bias)) for bias in grid)
        _csv(args, writer, 'fig3a.csv', result)
        _plot(args, writer, 'fig3a.svg', [('1550 nm', result, 'bias_norm', 'de_1550'), ('1310 nm', result, 'bias_norm', 'de_1310')],
              'Ib/Ic', 'system DE')
    writer.write_text('fig3_model.json', json.dumps(model.to_dict(), indent=2, sort_keys=True) + '\n')
    print(f'max DE at 0.99 Ic: 1550 nm {detector.system_de(model, 1550e-9, 0.99):.4f}, '
          f'1310 nm {detector.system_de(model, 1310e-9, 0.99):.4f}; DCR {detector.dark_rate(model, 0.99):.1f} Hz')

def _reproduce_fig4(args, library, writer):
    channels = []
    series = []
    for number in range(1, 5):
        model, curve = _fitted_curve(f'fig4_ch{number}', 1550e-9)
        channels.append(detector.DetectorChannelModel(f'ch{number}', model.coupling_efficiency, model.absorptance, model.midpoint,
                                                      model.steepness, model.dark_prefactor, model.dark_exponent))
        _csv(args, writer, f'fig4_ch{number}.csv', curve)
        series.append((f'ch{number}', curve, 'dcr_hz', 'de'))
    config = system.SystemConfig(tuple(channels), tuple(c.channel_id for c in channels))
    report = system.channel_report(config, 1550e-9)
    writer.write_text('fig4_channels.csv', report.to_csv_text())
    _plot(args, writer, 'fig4.svg', series, 'DCR (Hz)', 'system DE', logx=True)
    print(report.to_text(), end='')

def _reproduce_thin_substrate(args, library, writer):
    problem = designopt.LensDesignProblem(substrate_thickness=50e-6, library=library, seed=args.seed)
    result = designopt.optimize_lens_train(problem, workers=args.workers)
    _write_lens(args, writer, result, 'thin_substrate')
    print(result.summary(), end='')

def cmd_reproduce(args, library: MaterialLibrary, writer: OutputWriter) -> int:
    if args.figure == 'fig2':
        _reproduce_fig2(args, library, writer)
    elif args.figure in ('fig3a', 'fig3b'):
        _reproduce_fig3(args, library, writer, args.figure == 'fig3b')
    elif args.figure == 'fig4':
        _reproduce_fig4(args, library, writer)
    elif args.figure == 'thin-substrate':
        _reproduce_thin_substrate(args, library, writer)
    else:
        raise UsageError(f'unknown figure {args.figure!r}, expected one of {", ".join(FIGURES)}')
    return 0

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='ocsnspd', description='Cavity SNSPD optics, calibration and system toolkit.')
    parser.add_argument('--out', type=Path, default=Path('out'), help='output directory')
    parser.add_argument('--seed', type=int, default=0)
    parser.add_argument('--materials-dir', type=Path, default=None, help='directory of <material>.csv dispersion files')
    parser.add_argument('--format', choices=('csv', 'svg', 'both'), default='csv')
    parser.add_argument('-v', '--verbose', action='store_true')
    commands = parser.add_subparsers(dest='command', required=True)

    p = commands.add_parser('stack-spectrum', help='R, T and absorptance of a film stack')
    p.add_argument('--stack', type=Path, default=DESIGNS_DIR / 'oc_snspd_stack.json')
    p.add_argument('--start-nm', type=float, default=1300.0)
    p.add_argument('--stop-nm', type=float, default=1600.0)
    p.add_argument('--step-nm', type=float, default=10.0)
    p.add_argument('--angle-deg', type=float, default=0.0)
    p.add_argument('--polarization', default='TE')
    p.set_defaults(handler=cmd_stack_spectrum)

    p = commands.add_parser('beam-profile', help='Gaussian spot along a beam train')
    p.add_argument('--train', type=Path, default=DESIGNS_DIR / 'bare_fiber_train.json')
    p.add_argument('--step-um', type=float, default=5.0)
    p.set_defaults(handler=cmd_beam_profile)

    p = commands.add_parser('coupling', help='Gaussian power fraction on a square meander')
    p.add_argument('--w-um', type=float, required=True, help='spot radius')
    p.add_argument('--side-um', type=float, default=15.0)
    p.add_argument('--offset-x-um', type=float, default=0.0)
    p.add_argument('--offset-y-um', type=float, default=0.0)
    p.add_argument('--monte-carlo', type=int, default=0, metavar='SAMPLES')
    p.set_defaults(handler=cmd_coupling)

    p = commands.add_parser('fit', help='calibrate a channel model against observations')
    source = p.add_mutually_exclusive_group()
    source.add_argument('--observations', type=Path)
    source.add_argument('--calibration', default='fig3_best_channel', help='name of a bundled calibration set')
    p.add_argument('--amplitude', type=float, default=None, help='fix eta_c * A for every wavelength')
    p.add_argument('--channel-id', default='fit')
    p.set_defaults(handler=cmd_fit)

    p = commands.add_parser('curve', help='DE versus DCR of a channel model')
    p.add_argument('--model', type=Path, required=True)
    p.add_argument('--wavelength-nm', type=float, default=1550.0)
    p.set_defaults(handler=cmd_curve)

    p = commands.add_parser('channels', help='per-channel report of a system')
    p.add_argument('--system', type=Path, default=DATA_DIR / 'calibrations' / 'fig4_system.json')
    p.add_argument('--wavelength-nm', type=float, default=1550.0)
    p.set_defaults(handler=cmd_channels)

    p = commands.add_parser('optimize-cavity', help='band-averaged cavity design')
    p.add_argument('--stack', type=Path, default=DESIGNS_DIR / 'oc_snspd_stack.json')
    p.add_argument('--band-nm', type=float, nargs=2, default=(1300.0, 1600.0))
    p.add_argument('--points', type=int, default=designopt.DEFAULT_BAND_POINTS)
    p.add_argument('--vary-au', action='store_true')
    p.set_defaults(handler=cmd_optimize_cavity)

    p = commands.add_parser('optimize-lens', help='GRIN lens train design')
    p.add_argument('--problem', type=Path, default=None)
    p.add_argument('--substrate-um', type=float, default=None)
    p.add_argument('--starts', type=int, default=None)
    p.add_argument('--catalog', type=Path, default=None)
    p.add_argument('--workers', type=int, default=1)
    p.set_defaults(handler=cmd_optimize_lens)

    p = commands.add_parser('qkd', help='BB84 receiver budget')
    p.add_argument('--system', type=Path, default=DATA_DIR / 'calibrations' / 'fig4_system.json')
    p.add_argument('--mu', type=float, default=0.1)
    p.add_argument('--loss-db', type=float, default=10.0)
    p.add_argument('--internal-loss-db', type=float, default=0.0)
    p.add_argument('--pulse-rate', type=float, default=1e9)
    p.add_argument('--gate-fraction', type=float, default=1.0)
    p.add_argument('--e-det', type=float, default=0.01)
    p.add_argument('--wavelength-nm', type=float, default=1550.0)
    p.add_argument('--bias', type=float, default=None)
    p.add_argument('--target-dcr', type=float, default=100.0)
    p.add_argument('--loss-sweep', type=float, nargs=3, metavar=('START', 'STOP', 'STEP'))
    p.set_defaults(handler=cmd_qkd)

    p = commands.add_parser('reproduce', help='regenerate the curves of a figure')
    p.add_argument('figure', choices=FIGURES)
    p.add_argument('--with-optics', action='store_true', help='fig2: also predict coupling with and without lenses')
    p.add_argument('--workers', type=int, default=1)
    p.set_defaults(handler=cmd_reproduce)

    return parser

def _config_snapshot(args) -> dict:
    return {key: (str(value) if isinstance(value, Path) else value)
            for key, value in sorted(vars(args).items()) if key != 'handler'}

def main(argv: list[str] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format='%(levelname)s %(name)s: %(message)s')

    try:
        library = MaterialLibrary(args.materials_dir)
        command = args.command if args.command != 'reproduce' else f'reproduce {args.figure}'
        writer = OutputWriter(args.out, command, _config_snapshot(args), args.seed, library)
        return args.handler(args, library, writer)
    except UsageError as e:
        print(f'ocsnspd: usage error: {e}', file=sys.stderr)
        return 2
    except OCSNSPDException as e:
        print(f'ocsnspd: {type(e).__name__}: {e}', file=sys.stderr)
        return 1
    except OSError as e:
        print(f'ocsnspd: cannot write output: {e}', file=sys.stderr)
        return 1

if __name__ == '__main__':
    sys.exit(main())
