#!/usr/bin/env python3
# scripts/validate_artifacts.py

import sys
import argparse
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from calibration import read_sbc_records  # noqa: E402
from tstep import load_tposterior  # noqa: E402
from utils import read_json, read_numeric_csv  # noqa: E402


class ArtifactValidator:
    """Relê as saídas de um experimento com os leitores da biblioteca"""

    def __init__(self, out_dir):
        self.out_dir = Path(out_dir)
        self.validation_results = []

    def log_check(self, check_name, success, message, details=None):
        """Registrar resultado da validação"""
        result = {
            "check": check_name,
            "success": success,
            "message": message,
            "details": details
        }
        self.validation_results.append(result)

        status = "✅" if success else "❌"
        print(f"{status} {check_name}: {message}")

        if details and not success:
            print(f"   Detalhes: {details}")

    def validate_provenance(self):
        """Validar summary.json e provenance.json"""
        missing = [name for name in ('summary.json', 'provenance.json') if not (self.out_dir / name).exists()]
        if missing:
            self.log_check("Proveniência", False, f"Arquivos faltando: {', '.join(missing)}")
            return False

        provenance = read_json(self.out_dir / 'provenance.json')
        absent = [key for key in ('experiment', 'seed', 'config_hash', 'versions') if key not in provenance]
        if absent:
            self.log_check("Proveniência", False, f"Campos faltando: {', '.join(absent)}")
            return False

        diagnostics = provenance.get('diagnostics') or {}
        n_failed = diagnostics.get('n_failed', 0)
        self.log_check(
            "Proveniência",
            n_failed == 0,
            f"{provenance['experiment']} seed {provenance['seed']}, {n_failed} ajustes reprovados",
        )
        return n_failed == 0

    def validate_tposteriors(self):
        """Validar T-posteriors (CSV + JSON irmão)"""
        paths = sorted(self.out_dir.rglob('tposterior.csv'))
        bad = []
        for path in paths:
            try:
                tpost = load_tposterior(path)
                if tpost.draws is not None and not np.all(np.isfinite(tpost.draws)):
                    bad.append(f"{path.relative_to(self.out_dir)}: valores não finitos")
            except Exception as e:
                bad.append(f"{path.relative_to(self.out_dir)}: {e}")

        self.log_check("T-posteriors", not bad, f"{len(paths) - len(bad)}/{len(paths)} válidos",
                       details="; ".join(bad) or None)
        return not bad

    def validate_iposteriors(self):
        """Validar draws dos I-posteriors"""
        paths = sorted(self.out_dir.rglob('iposterior_*.csv'))
        bad = []
        for path in paths:
            header, draws = read_numeric_csv(path)
            if draws.shape[0] == 0 or draws.shape[1] != len(header) or not np.all(np.isfinite(draws)):
                bad.append(str(path.relative_to(self.out_dir)))

        self.log_check("I-posteriors", not bad, f"{len(paths) - len(bad)}/{len(paths)} válidos",
                       details=", ".join(bad) or None)
        return not bad

    def validate_sbc(self):
        """Validar registros SBC, se houver"""
        paths = sorted(self.out_dir.rglob('sbc_records.csv'))
        if not paths:
            return True

        n_records = 0
        for path in paths:
            n_records += len(read_sbc_records(path))

        self.log_check("Registros SBC", n_records > 0,
                       f"{n_records} registros em {len(paths)} células")
        return n_records > 0

    def run_full_validation(self):
        """Executar validação completa"""
        print(f"🔍 VALIDAÇÃO DE ARTEFATOS - {self.out_dir}")
        print("=" * 50)

        if not self.out_dir.is_dir():
            self.log_check("Diretório", False, f"{self.out_dir} não existe")
        else:
            self.validate_provenance()
            self.validate_tposteriors()
            self.validate_iposteriors()
            self.validate_sbc()

        print("\n" + "=" * 50)
        print("📋 RESUMO DA VALIDAÇÃO")
        print("=" * 50)

        total_checks = len(self.validation_results)
        passed_checks = sum(1 for r in self.validation_results if r["success"])

        print(f"Total de verificações: {total_checks}")
        print(f"✅ Passaram: {passed_checks}")
        print(f"❌ Falharam: {total_checks - passed_checks}")

        valid = all(r["success"] for r in self.validation_results)
        if not valid:
            print("\n🔧 PROBLEMAS ENCONTRADOS:")
            for result in self.validation_results:
                if not result["success"]:
                    print(f"   - {result['check']}: {result['message']}")

        return valid


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="Validar as saídas de um experimento")
    parser.add_argument('out_dir', help="Diretório de saída do experimento")
    args = parser.parse_args()

    validator = ArtifactValidator(args.out_dir)
    sys.exit(0 if validator.run_full_validation() else 1)
