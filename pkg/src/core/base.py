from abc import ABC, abstractmethod


class Process(ABC):
    """One stage of a tuple pipeline: consumes a monodromy tuple, returns the next one."""

    name = "process"

    @abstractmethod
    def apply(self, T):
        pass

    def describe(self) -> dict:
        return {"stage": self.name}
