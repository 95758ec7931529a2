"""File to handle the display of configurations and training progress in the terminal."""

import sys
from collections.abc import Mapping

from colorama import Fore, Style, init

from multipod.data_handling.packets.epoch_data_packet import EpochDataPacket

# Shorten colorama names
G = Fore.GREEN
R = Fore.RED
Y = Fore.YELLOW
C = Fore.CYAN
RESET = Style.RESET_ALL


class TrainingDisplay:
    """Class related to displaying the resolved configuration of a command and the progress of a
    training run in the terminal with pretty colors and spacing.
    """

    __slots__ = ("quiet",)

    def __init__(self, quiet: bool = False) -> None:
        """
        :param quiet: Suppresses the per-epoch lines. Banners, results and errors still print.
        """
        init(autoreset=True)  # Automatically reset colors after each print
        self.quiet = quiet

    @staticmethod
    def banner(title: str, settings: Mapping[str, object]) -> None:
        """
        Prints the resolved configuration of a command, one setting per line.
        :param title: What is being run.
        :param settings: Setting name -> value.
        """
        width = max((len(key) for key in settings), default=0) + 2
        output = [f"{Y}{'=' * 15} {title.upper()} {'=' * 15}{RESET}"]
        output.extend(f"{key + ':':<{width}}{C}{value}{RESET}" for key, value in settings.items())
        print("\n".join(output))

    def epoch(self, packet: EpochDataPacket, epochs: int) -> None:
        """
        Prints one line for a finished epoch.
        :param packet: The record of the epoch.
        :param epochs: Length of the run.
        """
        if self.quiet:
            return
        digits = len(str(epochs))
        print(
            f"Epoch {G}{packet.epoch + 1:>{digits}}{RESET}/{epochs}  "
            f"loss {G}{packet.train_loss:<8.4f}{RESET} "
            f"train {G}{packet.train_acc:>7.2%}{RESET}  "
            f"test {G}{packet.test_acc:>7.2%}{RESET}  "
            f"lr {C}{packet.lr:g}{RESET}"
        )

    @staticmethod
    def result(label: str, value: object) -> None:
        """Prints a final result."""
        print(f"{Y}{label}:{RESET} {G}{value}{RESET}")

    @staticmethod
    def error(message: str) -> None:
        """Prints a one-line diagnostic to stderr."""
        print(f"{R}error: {message}{RESET}", file=sys.stderr)
