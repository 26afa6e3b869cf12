# audit/management/commands/analyze_net.py
from audit.exceptions import ConfigError
from audit.management.base import AuditCommand
from audit.pipeline import run_network


class Command(AuditCommand):
    help = "Attribute captured traffic to apps and inspect intercepted HTTPS requests."

    config_defaults = {
        'pcap': lambda config: config['network']['pcaps'],
        'flows': lambda config: config['network']['flows'],
        'ps': lambda config: config['network']['ps'],
        'netstat': lambda config: config['network']['netstat'],
        'dest_map': lambda config: config['network']['dest_map'],
        'detectors': lambda config: config['network']['detectors'],
        'window': lambda config: config['network']['window'],
        'oem': lambda config: config['oem'],
    }

    def add_phase_arguments(self, parser):
        parser.add_argument('--pcap', nargs='*', help="Ethernet libpcap captures")
        parser.add_argument('--flows', help="Intercepted HTTPS flows (JSON lines)")
        parser.add_argument('--ps', help="Periodic ps snapshots")
        parser.add_argument('--netstat', help="Periodic netstat snapshots")
        parser.add_argument('--dest-map', help="CIDR -> organization JSON")
        parser.add_argument('--detectors', help="Request inspection detectors JSON")
        parser.add_argument('--window', type=float, help="Recording window in seconds, from the first record")
        parser.add_argument('--oem', help="OEM label recorded in network.json")

    def run(self, **options):
        self.require(options, 'ps', 'netstat')
        if options.get('window') is not None and options['window'] <= 0:
            raise ConfigError("must be positive", field='--window')
        pcaps = [self.existing_file({'pcap': pcap}, 'pcap') for pcap in options.get('pcap') or []]
        flows = self.existing_file(options, 'flows')
        if not pcaps and flows is None:
            self.require(options, 'pcap')
        out = self.out_dir(options)
        outcome = run_network(
            out,
            pcaps=pcaps,
            flows=flows,
            ps=self.existing_file(options, 'ps'),
            netstat=self.existing_file(options, 'netstat'),
            dest_map=self.existing_file(options, 'dest_map'),
            detectors=self.existing_file(options, 'detectors'),
            oem=options.get('oem'),
            window=options.get('window'),
        )
        section = outcome.section
        return (
            f"{section['total_bytes']} payload bytes over {len(section['per_app'])} apps "
            f"in {section['window_seconds']:g} s, {len(section['findings'])} request findings -> {out}"
        )
